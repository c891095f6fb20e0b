#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Hyperspectral Cube Input/Output

Binary container formats (all fields little-endian)

* Cube: magic "BLG1" | u32 height, width, bands | height·width·bands float32,
  pixel-major (row-major pixels, band-contiguous per pixel)
* Labels: magic "BLGL" | u32 height, width | height·width int16,
  0 = background
"""

###############################################################################

import math
import struct
import logging
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import ContractError, DataFormatError
from .utils import make_rng
from .constants import (
    CUBE_MAGIC, LABEL_MAGIC,
    FLAG_LABELED, FLAG_UNLABELED,
)

if TYPE_CHECKING:  # pragma: no cover
    from .superpixel import SuperpixelGraph

###############################################################################

LOGGER = logging.getLogger(__name__)

# refuse headers promising more than this many values
MAX_ELEMENTS = 1 << 31

###############################################################################


@dataclass(eq=False)
class HsiCube:
    """Radiance volume with its ground-truth label map"""
    values: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ContractError(
                f"Cube values must be HxWxB, got shape {self.values.shape}"
            )
        if self.labels is None:
            self.labels = np.zeros(self.values.shape[:2], dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != self.values.shape[:2]:
            raise ContractError(
                f"Label map {self.labels.shape} does not match cube "
                f"{self.values.shape[:2]}"
            )

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def pixels(self) -> np.ndarray:
        """(height·width) x bands view, row-major pixel order"""
        return self.values.reshape(-1, self.bands)

    def __repr__(self) -> str:
        return (
            f"HsiCube(height={self.height}, width={self.width}, "
            f"bands={self.bands}, classes={self.num_classes})"
        )

###############################################################################
# Binary Formats


def _read_header(data: bytes, magic: bytes, count: int, path) -> tuple:
    if len(data) < 4 or data[:4] != magic:
        raise DataFormatError(
            f"Bad magic bytes, expected {magic!r}", path=path, offset=0
        )
    header_size = 4 + 4 * count
    if len(data) < header_size:
        raise DataFormatError(
            "Truncated header", path=path, offset=len(data)
        )
    return struct.unpack_from(f"<{count}I", data, 4), header_size


def _check_payload(data: bytes, offset: int, n_items: int, itemsize: int,
                   path):
    if n_items > MAX_ELEMENTS:
        raise DataFormatError(
            f"Dimensions overflow ({n_items} values)", path=path, offset=4
        )
    expected = offset + n_items * itemsize
    if len(data) < expected:
        raise DataFormatError(
            f"Truncated payload, expected {expected} bytes",
            path=path, offset=len(data)
        )
    if len(data) > expected:
        raise DataFormatError(
            "Trailing bytes after payload", path=path, offset=expected
        )


def read_labels(path: str or Path) -> np.ndarray:
    """Read a BLGL label file into an HxW integer array"""
    data = Path(path).read_bytes()
    (height, width), offset = _read_header(data, LABEL_MAGIC, 2, path)
    _check_payload(data, offset, height * width, 2, path)
    labels = np.frombuffer(data, dtype="<i2", count=height * width,
                           offset=offset)
    return labels.reshape(height, width).astype(np.int64)


def load_cube(path: str or Path, labels_path: str or Path = None) -> HsiCube:
    """Load a BLG1 cube, optionally with its BLGL label map

    Parameters
    ----------
    path : str or Path
        Path to the cube file
    labels_path : str or Path, optional
        Path to the label file.
        If None, every pixel is background.
        The default is None.

    Returns
    -------
    HsiCube
        Values exactly as stored (float32 widened to float64)

    Raises
    ------
    DataFormatError
        On bad magic, truncated payload or overflowing dimensions.
        The error carries the byte offset.
    """
    data = Path(path).read_bytes()
    (height, width, bands), offset = _read_header(data, CUBE_MAGIC, 3, path)
    n_values = height * width * bands
    _check_payload(data, offset, n_values, 4, path)
    values = np.frombuffer(data, dtype="<f4", count=n_values, offset=offset)
    values = values.reshape(height, width, bands).astype(np.float64)

    labels = None
    if labels_path is not None:
        labels = read_labels(labels_path)
        if labels.shape != (height, width):
            raise DataFormatError(
                f"Label map {labels.shape} does not match cube "
                f"{(height, width)}",
                path=labels_path, offset=4
            )
    LOGGER.debug(f"Loaded cube {height}x{width}x{bands} from '{path}'.")
    return HsiCube(values=values, labels=labels)


def save_cube(cube: HsiCube, path: str or Path) -> Path:
    """Write the cube values as a BLG1 file"""
    path = Path(path)
    header = CUBE_MAGIC + struct.pack(
        "<3I", cube.height, cube.width, cube.bands
    )
    payload = np.ascontiguousarray(cube.values, dtype="<f4").tobytes()
    path.write_bytes(header + payload)
    return path


def save_labels(cube: HsiCube, path: str or Path) -> Path:
    """Write the label map as a BLGL file"""
    path = Path(path)
    if cube.labels.size and (
        cube.labels.min() < np.iinfo(np.int16).min
        or cube.labels.max() > np.iinfo(np.int16).max
    ):
        raise ContractError("Labels do not fit into int16.")
    header = LABEL_MAGIC + struct.pack("<2I", cube.height, cube.width)
    payload = np.ascontiguousarray(cube.labels, dtype="<i2").tobytes()
    path.write_bytes(header + payload)
    return path

###############################################################################


def normalize(cube: HsiCube) -> HsiCube:
    """Per-band min-max scaling to [0, 1]; constant bands become zeros"""
    values = cube.values
    low = values.min(axis=(0, 1), keepdims=True)
    span = values.max(axis=(0, 1), keepdims=True) - low
    safe_span = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (values - low) / safe_span, 0.0)
    return replace(cube, values=scaled, labels=cube.labels.copy())

###############################################################################
# Train / Unlabeled Split


@dataclass(eq=False)
class SplitAssignment:
    """Per-superpixel labeled/unlabeled flags"""
    labeled: np.ndarray
    unlabeled: np.ndarray

    def __post_init__(self):
        self.labeled = np.sort(np.asarray(self.labeled, dtype=np.int64))
        self.unlabeled = np.sort(np.asarray(self.unlabeled, dtype=np.int64))
        if np.intersect1d(self.labeled, self.unlabeled).size:
            raise ContractError("A node cannot be labeled and unlabeled.")

    @property
    def n_nodes(self) -> int:
        return int(self.labeled.size + self.unlabeled.size)

    def flags(self) -> list:
        flags = [None] * self.n_nodes
        for idx in self.labeled:
            flags[idx] = FLAG_LABELED
        for idx in self.unlabeled:
            flags[idx] = FLAG_UNLABELED
        return flags

    def with_labeled(self, new_nodes) -> "SplitAssignment":
        """Split extended by freshly appended labeled nodes"""
        return SplitAssignment(
            labeled=np.concatenate([self.labeled, np.asarray(new_nodes)]),
            unlabeled=self.unlabeled.copy()
        )

    def __repr__(self) -> str:
        return (
            f"SplitAssignment(labeled={self.labeled.size}, "
            f"unlabeled={self.unlabeled.size})"
        )


def labeled_count(n_class: int, ratio: float) -> int:
    """Round-half-up of ratio·n_class, at least 1"""
    exact = Decimal(repr(ratio)) * n_class
    return max(1, int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP)))


def split_superpixels(
    graph: "SuperpixelGraph",
    ratio: float,
    seed: int
) -> SplitAssignment:
    """Draw the labeled superpixels of every class

    Parameters
    ----------
    graph : SuperpixelGraph
        Graph whose node labels define the classes
    ratio : float
        Fraction of each class that is labeled, 0 < ratio < 1
    seed : int
        Sampling seed

    Returns
    -------
    SplitAssignment
        `labeled_count(n_class, ratio)` nodes per class drawn uniformly,
        every other node unlabeled.
    """
    if not 0 < ratio < 1:
        raise ContractError(f"Split ratio must lie in (0, 1), got {ratio}")
    rng = make_rng(seed)
    labels = np.asarray(graph.labels)
    labeled = []
    for class_id in range(1, graph.num_classes + 1):
        members = np.flatnonzero(labels == class_id)
        if members.size == 0:
            LOGGER.warning(f"Class {class_id} has no superpixels, skipped.")
            continue
        count = labeled_count(members.size, ratio)
        labeled.extend(rng.choice(members, size=count, replace=False))

    labeled = np.asarray(sorted(labeled), dtype=np.int64)
    unlabeled = np.setdiff1d(np.arange(labels.size), labeled)
    return SplitAssignment(labeled=labeled, unlabeled=unlabeled)


def save_split(split: SplitAssignment, path: str or Path) -> Path:
    """One line per node: `node_id flag`"""
    path = Path(path)
    lines = [f"{idx} {flag}" for idx, flag in enumerate(split.flags())]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_split(path: str or Path) -> SplitAssignment:
    labeled, unlabeled = [], []
    for line_number, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip():
            continue
        try:
            node_id, flag = line.split()
            node_id = int(node_id)
        except ValueError:
            raise DataFormatError(
                "Malformed split line", path=path, offset=line_number + 1
            ) from None
        if flag == FLAG_LABELED:
            labeled.append(node_id)
        elif flag == FLAG_UNLABELED:
            unlabeled.append(node_id)
        else:
            raise DataFormatError(
                f"Unknown flag '{flag}'", path=path, offset=line_number + 1
            )
    return SplitAssignment(labeled=labeled, unlabeled=unlabeled)

###############################################################################
# Synthetic Data


@dataclass
class SynthSpec:
    """Layout of a synthetic cube

    Class blobs are `blob` x `blob` squares arranged on a grid of `columns`
    columns, separated from each other and from the border by `gap`
    background pixels.
    """
    n_classes: int = 4
    bands: int = 10
    blob: int = 16
    gap: int = 6
    noise: float = 0.0
    seed: int = 0
    columns: int = None

    def __post_init__(self):
        if self.n_classes < 1 or self.bands < 1 or self.blob < 1:
            raise ContractError("Synthetic cube needs classes, bands, blobs.")
        if self.gap < 0 or self.noise < 0:
            raise ContractError("Gap and noise must be non-negative.")
        if self.columns is None:
            self.columns = math.ceil(math.sqrt(self.n_classes))


def synth_dataset(spec: SynthSpec) -> HsiCube:
    """Deterministic cube of class blobs with per-class Gaussian spectra"""
    rng = make_rng(spec.seed)
    rows = math.ceil(spec.n_classes / spec.columns)
    height = rows * spec.blob + (rows + 1) * spec.gap
    width = spec.columns * spec.blob + (spec.columns + 1) * spec.gap

    # row 0 is the background spectrum
    means = rng.uniform(0.1, 0.9, size=(spec.n_classes + 1, spec.bands))

    labels = np.zeros((height, width), dtype=np.int64)
    for class_id in range(1, spec.n_classes + 1):
        grid_row, grid_col = divmod(class_id - 1, spec.columns)
        top = spec.gap + grid_row * (spec.blob + spec.gap)
        left = spec.gap + grid_col * (spec.blob + spec.gap)
        labels[top:top + spec.blob, left:left + spec.blob] = class_id

    values = means[labels]
    if spec.noise > 0:
        values = values + spec.noise * rng.standard_normal(values.shape)
    return HsiCube(values=values, labels=labels)

###############################################################################
