#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Classification Pipeline

Preprocess (segment, build the graph, split), optionally augment minority
classes, train with dynamic control, evaluate and report. Every stage writes
its artefacts under the output directory with fixed file names, and a manifest
records the configuration, seeds and input checksums of the run.
"""

###############################################################################

import hashlib
import logging
from pathlib import Path
from contextlib import contextmanager
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .config import RunConfig
from .errors import BLGCNError, ConfigError
from .hsi_io import (
    HsiCube, SplitAssignment,
    load_cube, normalize, split_superpixels, save_split, load_split,
    synth_dataset
)
from .superpixel import (
    Segmentation, SuperpixelGraph,
    slic_segment, build_graph, export_graph, load_graph,
    save_segmentation, load_segmentation
)
from .gan_augment import augment_graph, detect_minority
from .model import BlgcnModel, save_checkpoint, load_checkpoint
from .trainer import TrainHistory, Evaluation, train, evaluate
from .metrics import (
    ClassificationReport,
    compute_metrics, aggregate_trials, format_report, emit_map,
    segment_classes
)
from .models import open_ledger, record_trial, batch_records, TrialRecord
from .utils import file_checksum
from .constants import (
    GRAPH_FILE, SPLIT_FILE, AUGMENTED_GRAPH_FILE, AUGMENTED_SPLIT_FILE,
    GAN_HISTORY_FILE, SEGMENTATION_FILE, HISTORY_FILE, REPORT_FILE, MAP_FILE,
    MANIFEST_FILE, CHECKPOINT_FILE, TRIALS_DB_FILE, TRIAL_DIR_FORMAT,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

STATUS_RUNNING = "running"
STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"

###############################################################################


@dataclass
class Pipeline:
    """
    Pipeline of one run

    Holds the run configuration and the artefact of every stage. Stages can
    be run one by one (each one loads what it needs from the output directory
    when it was not produced in this session) or all together with `run()`.
    """
    config: RunConfig = field(default_factory=RunConfig)
    output_dir: str or Path = field(default=None)

    # ----------------------------------------------------------------------- #

    def __post_init__(self):
        self.output_dir = Path(self.output_dir or self.config.output_dir)
        self.cube: Optional[HsiCube] = None
        self.segmentation: Optional[Segmentation] = None
        self.graph: Optional[SuperpixelGraph] = None
        self.split: Optional[SplitAssignment] = None
        self.model: Optional[BlgcnModel] = None
        self.history: Optional[TrainHistory] = None
        self.evaluation: Optional[Evaluation] = None
        self.report: Optional[ClassificationReport] = None
        self.augmented: Dict[int, int] = {}
        self.stage: str = None

    def path(self, name: str) -> Path:
        return self.output_dir / name

    @contextmanager
    def _stage(self, name: str):
        self.stage = name
        LOGGER.info(f"Stage '{name}' ...")
        yield
        LOGGER.info(f"Stage '{name}' done.")

    # ----------------------------------------------------------------------- #
    # Manifest

    def write_manifest(self, status: str, stage: str = None) -> Path:
        """Write the reproduction manifest of the run"""
        config = self.config
        lines = [f"status={status}"]
        if stage is not None:
            lines.append(f"stage={stage}")
        lines.extend([
            f"version pyblgcn={__version__}",
            f"version numpy={np.__version__}",
            f"version scipy={scipy.__version__}",
            f"seed={config.seed}",
        ])
        if config.cube:
            lines.append(f"checksum cube={file_checksum(config.cube)}")
            if config.labels:
                lines.append(
                    f"checksum labels={file_checksum(config.labels)}"
                )
        else:
            lines.append("input=synthetic")
        lines.append("[config]")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.path(MANIFEST_FILE)
        path.write_text("\n".join(lines) + "\n" + config.dump())
        return path

    # ----------------------------------------------------------------------- #
    # Stages

    def load(self) -> HsiCube:
        """Load the configured cube, or build the synthetic one"""
        config = self.config
        if config.cube:
            if not config.labels:
                raise ConfigError("A label file is required with a cube.")
            cube = load_cube(config.cube, config.labels)
        else:
            cube = synth_dataset(config.synth())
        LOGGER.info(f"Loaded {cube}.")
        self.cube = normalize(cube) if config.normalize else cube
        return self.cube

    def preprocess(self) -> Path:
        """Segment, build the graph and draw the split

        Returns
        -------
        Path
            Path of the exported graph
        """
        with self._stage("preprocess"):
            cube = self.cube if self.cube is not None else self.load()
            slic = self.config.slic()
            self.segmentation = slic_segment(
                cube,
                n_segments=slic.n_segments,
                compactness=slic.compactness,
                iterations=slic.iterations,
                seed=slic.seed,
                jitter=slic.jitter,
            )
            self.graph = build_graph(self.segmentation, cube)
            self.split = split_superpixels(
                self.graph, self.config.split_ratio, self.config.seed
            )
            self.output_dir.mkdir(parents=True, exist_ok=True)
            for name in (AUGMENTED_GRAPH_FILE, AUGMENTED_SPLIT_FILE,
                         GAN_HISTORY_FILE):
                self.path(name).unlink(missing_ok=True)
            save_segmentation(self.segmentation, self.path(SEGMENTATION_FILE))
            save_split(self.split, self.path(SPLIT_FILE))
            return export_graph(self.graph, self.path(GRAPH_FILE))

    def _load_preprocessed(self):
        if self.segmentation is None:
            self.segmentation = load_segmentation(self.path(SEGMENTATION_FILE))
        if self.graph is None:
            graph_path = self.path(GRAPH_FILE)
            split_path = self.path(SPLIT_FILE)
            if self.path(AUGMENTED_GRAPH_FILE).is_file():
                graph_path = self.path(AUGMENTED_GRAPH_FILE)
                split_path = self.path(AUGMENTED_SPLIT_FILE)
            self.graph = load_graph(graph_path, self.segmentation)
            self.split = load_split(split_path)

    def augment(self) -> SuperpixelGraph:
        """Grow minority classes with generated nodes (if enabled)"""
        with self._stage("augment"):
            self._load_preprocessed()
            if not self.config.augment:
                LOGGER.info("Augmentation disabled, stage skipped.")
                return self.graph
            if not detect_minority(self.graph, self.config.minority_threshold):
                LOGGER.info("Classes are balanced, augmentation skipped.")
                return self.graph

            result = augment_graph(self.graph, self.split, self.config.gan())
            self.graph, self.split = result.graph, result.split
            self.augmented = result.added
            export_graph(self.graph, self.path(AUGMENTED_GRAPH_FILE))
            save_split(self.split, self.path(AUGMENTED_SPLIT_FILE))
            lines = ["class,epoch,d_loss,g_loss"]
            for class_id, history in result.histories.items():
                lines.extend(
                    f"{class_id},{epoch},{d_loss!r},{g_loss!r}"
                    for epoch, (d_loss, g_loss) in enumerate(history)
                )
            self.path(GAN_HISTORY_FILE).write_text("\n".join(lines) + "\n")
            LOGGER.info(f"Generated nodes per class: {self.augmented}")
            return self.graph

    def train(self) -> BlgcnModel:
        """Train a fresh model; history and checkpoint are always written"""
        with self._stage("train"):
            self._load_preprocessed()
            self.model = BlgcnModel(
                self.graph.n_features,
                self.graph.num_classes,
                self.config.model()
            )
            self.history = TrainHistory()
            try:
                train(self.model, self.graph, self.split,
                      self.config.train(), history=self.history)
            finally:
                self.history.to_csv(self.path(HISTORY_FILE))
                save_checkpoint(self.model, self.path(CHECKPOINT_FILE))
            return self.model

    def evaluate(self) -> ClassificationReport:
        """Monte-Carlo evaluation on unlabeled nodes; report and map"""
        with self._stage("evaluate"):
            self._load_preprocessed()
            if self.model is None:
                self.model = load_checkpoint(self.path(CHECKPOINT_FILE))

            config = self.config
            self.evaluation = evaluate(
                self.model, self.graph, self.split,
                n_samples=config.eval_samples, seed=config.seed, z=config.z
            )
            test = self.split.unlabeled
            weights = None
            if config.pixel_weighted:
                weights = self.graph.pixel_counts()[test]
            self.report = compute_metrics(
                self.evaluation.predictions[test],
                self.graph.labels[test],
                n_classes=self.graph.num_classes,
                weights=weights,
            )
            self.report.ci = self.evaluation.ci

            self.path(REPORT_FILE).write_text(format_report(self.report))
            emit_map(
                self.segmentation,
                segment_classes(
                    self.graph, self.evaluation.predictions,
                    self.segmentation.n_segments
                ),
                self.path(MAP_FILE),
            )
            LOGGER.info(
                f"OA={self.report.oa:.4f}, AA={self.report.aa:.4f}, "
                f"Kappa={self.report.kappa:.4f}"
            )
            return self.report

    def run(self) -> ClassificationReport:
        """All stages, with the manifest tracking the progress"""
        self.write_manifest(STATUS_RUNNING)
        try:
            self.load()
            self.preprocess()
            self.augment()
            self.train()
            report = self.evaluate()
        except Exception:
            self.write_manifest(STATUS_FAILED, stage=self.stage)
            raise
        self.write_manifest(STATUS_COMPLETE)
        return report

###############################################################################
# Trials


@dataclass
class TrialOutcome:
    seed: int
    report: ClassificationReport = None
    epochs: int = None
    stop_reason: str = None
    error: str = None


def run_trial(config: RunConfig, index: int) -> TrialOutcome:
    """Full run with seed `config.seed + index` in its own directory"""
    seed = config.seed + index
    trial_config = config.with_seed(seed)
    output_dir = Path(config.output_dir) / TRIAL_DIR_FORMAT.format(index)
    pipeline = Pipeline(trial_config, output_dir=output_dir)
    try:
        report = pipeline.run()
    except BLGCNError as error:
        return TrialOutcome(
            seed=seed, error=f"{type(error).__name__}: {error}"
        )
    return TrialOutcome(
        seed=seed,
        report=report,
        epochs=pipeline.history.n_epochs,
        stop_reason=pipeline.history.stop_reason,
    )


def batch_id(config: RunConfig) -> str:
    """Identifier of a batch of trials, derived from its configuration"""
    return hashlib.sha256(config.dump().encode("utf-8")).hexdigest()[:16]


def run_trials(config: RunConfig) -> str:
    """Run `config.trials` trials and write the aggregated report

    Trials use the seeds `seed + 0 .. seed + trials - 1` and run in
    `config.jobs` processes. Failed trials are logged and left out of the
    summary.

    Returns
    -------
    str
        Text of the aggregated report
    """
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    indices = list(range(config.trials))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as executor:
            outcomes = list(
                executor.map(run_trial, [config] * len(indices), indices)
            )
    else:
        outcomes = [run_trial(config, index) for index in indices]

    batch = batch_id(config)
    database = open_ledger(output_dir / TRIALS_DB_FILE)
    with database.atomic():
        TrialRecord.delete().where(TrialRecord.batch == batch).execute()
        for outcome in outcomes:
            if outcome.error is not None:
                LOGGER.warning(f"Trial with seed {outcome.seed} failed: "
                               f"{outcome.error}")
            else:
                LOGGER.info(
                    f"Trial with seed {outcome.seed}: "
                    f"OA={outcome.report.oa:.4f}"
                )
            record_trial(
                batch, outcome.seed, outcome.report,
                epochs=outcome.epochs,
                stop_reason=outcome.stop_reason,
                error=outcome.error,
            )
    records: List[TrialRecord] = batch_records(batch)
    database.close()

    failed = len(outcomes) - len(records)
    if not records:
        raise BLGCNError(f"All {len(outcomes)} trials failed.")
    summary = aggregate_trials([record.to_report() for record in records])
    text = format_report(summary)
    if failed:
        text += f"Failed trials: {failed} of {len(outcomes)}\n"
    (output_dir / REPORT_FILE).write_text(text)
    LOGGER.info(
        f"{summary.n} of {len(outcomes)} trials completed: "
        f"OA {summary.mean['OA']:.4f} ± {summary.std['OA']:.4f}"
    )
    return text

###############################################################################
