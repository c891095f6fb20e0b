#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for `pyblgcn.pipeline`"""

import logging
from dataclasses import replace

import numpy as np
import pytest

from pyblgcn.pipeline import Pipeline, run_trials, batch_id
from pyblgcn.hsi_io import SplitAssignment, save_cube, save_labels
from pyblgcn.superpixel import (
    Segmentation, SuperpixelGraph, save_segmentation
)
from pyblgcn.models import open_ledger, batch_records
from pyblgcn.errors import ConfigError, DataFormatError
from pyblgcn.constants import (
    GRAPH_FILE, SPLIT_FILE, SEGMENTATION_FILE, HISTORY_FILE, REPORT_FILE,
    MAP_FILE, MANIFEST_FILE, CHECKPOINT_FILE, AUGMENTED_GRAPH_FILE,
    AUGMENTED_SPLIT_FILE, GAN_HISTORY_FILE, TRIALS_DB_FILE
)

###############################################################################


def manifest(pipeline):
    lines = pipeline.path(MANIFEST_FILE).read_text().splitlines()
    return dict(line.split("=", 1) for line in lines[:lines.index("[config]")]
                if "=" in line)


def imbalanced_graph(n_major=60, n_minor=2, n_bands=3):
    labels = np.array([1] * n_major + [2] * n_minor)
    n_nodes = labels.size
    texture = np.random.default_rng(0).random((n_nodes, n_bands))
    adjacency = np.zeros((n_nodes, n_nodes))
    idx = np.arange(n_nodes - 1)
    adjacency[idx, idx + 1] = adjacency[idx + 1, idx] = 1
    segmentation = Segmentation(labels=np.arange(n_nodes).reshape(1, -1))
    graph = SuperpixelGraph(
        features=np.column_stack([texture, (texture ** 2).sum(axis=1)]),
        adjacency=adjacency,
        labels=labels,
        members=[np.array([i]) for i in range(n_nodes)],
        segment_ids=np.arange(n_nodes),
    )
    return graph, segmentation

###############################################################################


def test_run_writes_every_artefact(fast_run_config):
    pipeline = Pipeline(fast_run_config)
    report = pipeline.run()
    for name in (GRAPH_FILE, SPLIT_FILE, SEGMENTATION_FILE, HISTORY_FILE,
                 REPORT_FILE, MAP_FILE, MANIFEST_FILE, CHECKPOINT_FILE):
        assert pipeline.path(name).is_file(), name

    values = manifest(pipeline)
    assert values["status"] == "complete"
    assert values["input"] == "synthetic"
    assert values["seed"] == "0"
    text = pipeline.path(MANIFEST_FILE).read_text()
    assert text.endswith(fast_run_config.dump())

    assert 0 <= report.oa <= 1
    assert report.ci is not None
    history_lines = pipeline.path(HISTORY_FILE).read_text().splitlines()
    assert len(history_lines) == pipeline.history.n_epochs
    assert pipeline.path(MAP_FILE).read_bytes().startswith(b"P6\n")


def test_run_is_reproducible(tmp_path, fast_run_config):
    first = Pipeline(fast_run_config)
    first.run()
    second = Pipeline(fast_run_config, output_dir=tmp_path / "again")
    second.run()
    for name in (GRAPH_FILE, SPLIT_FILE, HISTORY_FILE, REPORT_FILE, MAP_FILE):
        assert first.path(name).read_bytes() == \
            second.path(name).read_bytes(), name


def test_balanced_classes_skip_augmentation(caplog, fast_run_config):
    caplog.set_level(logging.INFO)
    pipeline = Pipeline(replace(fast_run_config, minority_threshold=0.01,
                                fill_threshold=0.02))
    pipeline.load()
    pipeline.preprocess()
    graph = pipeline.augment()
    assert graph is pipeline.graph
    assert pipeline.augmented == {}
    assert "Classes are balanced, augmentation skipped." in caplog.messages
    assert not pipeline.path(AUGMENTED_GRAPH_FILE).exists()


def test_disabled_augmentation(caplog, fast_run_config):
    caplog.set_level(logging.INFO)
    pipeline = Pipeline(replace(fast_run_config, augment=False))
    pipeline.preprocess()
    pipeline.augment()
    assert "Augmentation disabled, stage skipped." in caplog.messages


def test_augment_stage_files(fast_run_config):
    config = replace(fast_run_config, minority_threshold=0.05,
                     fill_threshold=0.1, gan_epochs=4)
    pipeline = Pipeline(config)
    pipeline.output_dir.mkdir(parents=True)
    pipeline.graph, pipeline.segmentation = imbalanced_graph()
    pipeline.split = SplitAssignment(labeled=[0, 1, 60, 61],
                                     unlabeled=list(range(2, 60)))
    save_segmentation(pipeline.segmentation,
                      pipeline.path(SEGMENTATION_FILE))
    pipeline.augment()

    assert pipeline.augmented == {2: 4}
    lines = pipeline.path(GAN_HISTORY_FILE).read_text().splitlines()
    assert lines[0] == "class,epoch,d_loss,g_loss"
    assert [line.split(",")[:2] for line in lines[1:]] == \
        [["2", str(epoch)] for epoch in range(4)]

    # a later session picks up the augmented graph and split
    later = Pipeline(config)
    later._load_preprocessed()
    assert later.graph.n_nodes == 66
    assert later.split.n_nodes == 66
    assert list(later.graph.class_counts()) == [60, 6]
    assert later.path(AUGMENTED_SPLIT_FILE).is_file()


def test_preprocess_removes_stale_augmentation(fast_run_config):
    pipeline = Pipeline(fast_run_config)
    pipeline.output_dir.mkdir(parents=True)
    stale = pipeline.path(AUGMENTED_GRAPH_FILE)
    stale.write_text("nodes 0 0 0\n")
    pipeline.preprocess()
    assert not stale.exists()


def test_stages_resume_from_disk(fast_run_config):
    Pipeline(fast_run_config).preprocess()
    trainer = Pipeline(fast_run_config)
    trainer.train()
    evaluator = Pipeline(fast_run_config)
    report = evaluator.evaluate()
    assert evaluator.model is not None
    assert evaluator.path(REPORT_FILE).is_file()
    assert report.n_classes == 4

###############################################################################


def test_cube_without_labels(tmp_path, fast_run_config, synth_cube):
    cube_path = save_cube(synth_cube, tmp_path / "cube.blg")
    pipeline = Pipeline(replace(fast_run_config, cube=str(cube_path)))
    with pytest.raises(ConfigError):
        pipeline.run()
    assert manifest(pipeline)["status"] == "failed"


def test_failed_stage_is_recorded(tmp_path, fast_run_config, synth_cube):
    cube_path = save_cube(synth_cube, tmp_path / "cube.blg")
    labels_path = tmp_path / "labels.blgl"
    labels_path.write_bytes(b"junk")
    config = replace(fast_run_config, cube=str(cube_path),
                     labels=str(labels_path))
    pipeline = Pipeline(config)
    with pytest.raises(DataFormatError):
        pipeline.run()
    assert manifest(pipeline)["status"] == "failed"


def test_cube_input_manifest(tmp_path, fast_run_config, synth_cube):
    cube_path = save_cube(synth_cube, tmp_path / "cube.blg")
    labels_path = save_labels(synth_cube, tmp_path / "labels.blgl")
    config = replace(fast_run_config, cube=str(cube_path),
                     labels=str(labels_path), max_epochs=2)
    pipeline = Pipeline(config)
    pipeline.write_manifest("running")
    values = manifest(pipeline)
    assert values["status"] == "running"
    assert len(values["checksum cube"]) == 64
    assert "input" not in values

###############################################################################


def test_run_trials(fast_run_config):
    config = replace(fast_run_config, trials=2, max_epochs=5)
    text = run_trials(config)
    output_dir = fast_run_config.output_dir
    assert "Trials: 2" in text
    assert "Failed trials" not in text

    database = open_ledger(f"{output_dir}/{TRIALS_DB_FILE}")
    records = batch_records(batch_id(config))
    database.close()
    assert [record.seed for record in records] == [0, 1]
    assert all(record.stop_reason for record in records)

    # a rerun replaces the rows of the batch
    run_trials(config)
    database = open_ledger(f"{output_dir}/{TRIALS_DB_FILE}")
    assert len(batch_records(batch_id(config))) == 2
    database.close()


def test_batch_id_follows_config(fast_run_config):
    assert batch_id(fast_run_config) == batch_id(replace(fast_run_config))
    assert batch_id(fast_run_config) != \
        batch_id(replace(fast_run_config, seed=1))
    assert len(batch_id(fast_run_config)) == 16
