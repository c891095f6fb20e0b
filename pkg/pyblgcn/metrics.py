#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Classification Metrics, Reports and Maps
"""

###############################################################################

import colorsys
import logging
from pathlib import Path
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .errors import ContractError
from .superpixel import Segmentation, SuperpixelGraph
from .utils import sample_std

###############################################################################

LOGGER = logging.getLogger(__name__)

# index 0 is the background
DEFAULT_PALETTE = np.array([
    (0, 0, 0),
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
], dtype=np.uint8)

METRIC_NAMES = ["OA", "AA", "Kappa"]

###############################################################################


@dataclass(eq=False)
class ClassificationReport:
    """Confusion-matrix metrics

    `per_class[i]` is the accuracy of class i + 1, NaN when the class does
    not occur in the truth.
    """
    confusion: np.ndarray = field(repr=False)
    per_class: np.ndarray = field(repr=False)
    oa: float
    aa: float
    kappa: float
    ci: object = None

    @property
    def n_classes(self) -> int:
        return self.confusion.shape[0]

    def as_dict(self) -> Dict[str, float]:
        metrics = {
            f"class_{idx}": float(value)
            for idx, value in enumerate(self.per_class, start=1)
        }
        metrics.update({"OA": self.oa, "AA": self.aa, "Kappa": self.kappa})
        return metrics


@dataclass
class TrialSummary:
    """Mean and sample standard deviation of every metric over trials"""
    n: int
    n_classes: int
    mean: Dict[str, float] = field(default_factory=dict)
    std: Dict[str, float] = field(default_factory=dict)


def compute_metrics(
    predicted: Sequence[int],
    truth: Sequence[int],
    n_classes: int = None,
    weights: Sequence[float] = None
) -> ClassificationReport:
    """Overall accuracy, average accuracy and Cohen's kappa

    Parameters
    ----------
    predicted, truth : sequence of int
        Class ids in 1..C
    n_classes : int, optional
        Number of classes C. If None, the largest id present.
        The default is None.
    weights : sequence of float, optional
        Weight of every pair (e.g. superpixel pixel counts), giving the
        pixel-weighted variant of every metric.
        The default is None.

    Returns
    -------
    ClassificationReport
        AA averages over the classes present in the truth. Kappa is 1 when
        chance agreement is total and the prediction is perfect, 0 when
        chance agreement is total otherwise.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.size == 0:
        raise ContractError("Cannot compute metrics of an empty prediction.")
    if predicted.shape != truth.shape:
        raise ContractError(
            f"Predictions ({predicted.size}) and truth ({truth.size}) differ "
            "in length"
        )
    if n_classes is None:
        n_classes = int(max(predicted.max(), truth.max()))
    if min(predicted.min(), truth.min()) < 1 or \
            max(predicted.max(), truth.max()) > n_classes:
        raise ContractError(f"Labels must lie in 1..{n_classes}")
    if weights is None:
        confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(confusion, (truth - 1, predicted - 1), 1)
    else:
        confusion = np.zeros((n_classes, n_classes))
        np.add.at(confusion, (truth - 1, predicted - 1),
                  np.asarray(weights, dtype=np.float64))

    total = confusion.sum()
    rows = confusion.sum(axis=1)
    cols = confusion.sum(axis=0)
    diagonal = np.diag(confusion)

    present = rows > 0
    per_class = np.full(n_classes, np.nan)
    per_class[present] = diagonal[present] / rows[present]

    p_observed = float(diagonal.sum() / total)
    p_expected = float((rows * cols).sum() / total ** 2)
    if p_expected == 1.0:
        kappa = 1.0 if p_observed == 1.0 else 0.0
    else:
        kappa = (p_observed - p_expected) / (1.0 - p_expected)

    return ClassificationReport(
        confusion=confusion,
        per_class=per_class,
        oa=p_observed,
        aa=float(per_class[present].mean()),
        kappa=float(kappa),
    )


def aggregate_trials(
    reports: List[ClassificationReport]
) -> TrialSummary:
    """Mean and sample standard deviation (0 for one trial) of every metric

    Per-class accuracies that are undefined in a trial are left out of that
    class's statistics.
    """
    if not reports:
        raise ContractError("At least one report is required.")
    n_classes = max(report.n_classes for report in reports)
    summary = TrialSummary(n=len(reports), n_classes=n_classes)
    keys = [f"class_{idx}" for idx in range(1, n_classes + 1)] + METRIC_NAMES
    for key in keys:
        values = [
            report.as_dict().get(key, np.nan) for report in reports
        ]
        values = np.sort([v for v in values if np.isfinite(v)])
        if values.size == 0:
            summary.mean[key] = float("nan")
            summary.std[key] = float("nan")
            continue
        summary.mean[key] = float(values.mean())
        summary.std[key] = sample_std(values)
    return summary

###############################################################################
# Text report


def _cell(mean: float, std: float) -> str:
    if not np.isfinite(mean):
        return "-"
    return f"{100 * mean:.2f}±{100 * std:.2f}"


def format_report(
    result: TrialSummary or ClassificationReport,
    class_names: Dict[int, str] = None,
    title: str = "BLGCN"
) -> str:
    """Aligned text table of per-class accuracies, OA, AA and Kappa

    Cells are percentages written as mean±std.
    """
    ci = None
    if isinstance(result, ClassificationReport):
        ci = result.ci
        result = aggregate_trials([result])
    class_names = class_names or {}

    rows = []
    for class_id in range(1, result.n_classes + 1):
        key = f"class_{class_id}"
        name = class_names.get(class_id, str(class_id))
        rows.append((name, _cell(result.mean[key], result.std[key])))
    rule_at = len(rows)
    for key in METRIC_NAMES:
        rows.append((key, _cell(result.mean[key], result.std[key])))

    name_width = max(len("Class"), *(len(name) for name, _ in rows))
    cell_width = max(len(title), *(len(cell) for _, cell in rows))
    rule = "-" * (name_width + 2 + cell_width)

    lines = [f"{'Class':<{name_width}}  {title:>{cell_width}}", rule]
    for idx, (name, cell) in enumerate(rows):
        if idx == rule_at:
            lines.append(rule)
        lines.append(f"{name:<{name_width}}  {cell:>{cell_width}}")
    lines.append(rule)
    lines.append(f"Trials: {result.n}")
    if ci is not None:
        lines.append(
            f"CI ({ci.level:.0%}): [{ci.lower:.5f}, {ci.upper:.5f}], "
            f"mean {ci.mean:.5f}"
        )
    return "\n".join(lines) + "\n"

###############################################################################
# Classification map


def palette_for(n_classes: int) -> np.ndarray:
    """`DEFAULT_PALETTE`, extended with evenly spread hues when needed"""
    if n_classes < len(DEFAULT_PALETTE):
        return DEFAULT_PALETTE
    extra = []
    for idx in range(n_classes + 1 - len(DEFAULT_PALETTE)):
        hue = (idx * 0.618033988749895) % 1.0
        extra.append([
            int(round(255 * c)) for c in colorsys.hsv_to_rgb(hue, 0.8, 0.9)
        ])
    return np.vstack([DEFAULT_PALETTE, np.array(extra, dtype=np.uint8)])


def segment_classes(
    graph: SuperpixelGraph,
    node_classes: Sequence[int],
    n_segments: int
) -> np.ndarray:
    """Class of every segmentation id (0 for background segments)"""
    classes = np.zeros(n_segments, dtype=np.int64)
    segment_ids = np.asarray(graph.segment_ids)
    real = segment_ids >= 0
    classes[segment_ids[real]] = np.asarray(node_classes)[real]
    return classes


def emit_map(
    segmentation: Segmentation,
    classes: Sequence[int],
    path: str or Path,
    palette: np.ndarray = None
) -> Path:
    """Write a binary PPM (P6) classification map

    Parameters
    ----------
    segmentation : Segmentation
        Per-pixel superpixel ids
    classes : sequence of int
        Class of every superpixel id, 0 for background
    path : str or Path
        Output file
    palette : np.ndarray, optional
        (C+1) x 3 RGB colours, row 0 for the background.
        If None, `palette_for(max class)`.
        The default is None.

    Returns
    -------
    Path
        Path of the written image
    """
    classes = np.asarray(classes, dtype=np.int64)
    if classes.size < segmentation.n_segments:
        raise ContractError(
            f"Classes given for {classes.size} of "
            f"{segmentation.n_segments} superpixels"
        )
    if palette is None:
        palette = palette_for(int(classes.max()) if classes.size else 0)
    palette = np.asarray(palette, dtype=np.uint8)
    if classes.size and classes.max() >= len(palette):
        raise ContractError(
            f"Palette of {len(palette)} colours cannot draw class "
            f"{classes.max()}"
        )

    pixels = palette[classes[segmentation.labels]]
    height, width = segmentation.shape
    path = Path(path)
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(pixels).tobytes())
    LOGGER.info(f"Classification map written to '{path}'.")
    return path

###############################################################################
