#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Global Fixtures"""

###############################################################################

import pytest

from pyblgcn.hsi_io import (
    SynthSpec, synth_dataset, normalize, split_superpixels
)
from pyblgcn.superpixel import slic_segment, build_graph
from pyblgcn.model import BlgcnModel, ModelConfig
from pyblgcn.trainer import TrainConfig, train
from pyblgcn.config import RunConfig

###############################################################################


@pytest.fixture(scope="session")
def synth_spec():
    return SynthSpec(n_classes=4, bands=10, blob=16, gap=6, seed=0)


@pytest.fixture(scope="session")
def synth_cube(synth_spec):
    return normalize(synth_dataset(synth_spec))


@pytest.fixture(scope="session")
def segmentation(synth_cube):
    return slic_segment(synth_cube, n_segments=100)


@pytest.fixture(scope="session")
def graph(segmentation, synth_cube):
    return build_graph(segmentation, synth_cube)


@pytest.fixture(scope="session")
def split(graph):
    return split_superpixels(graph, 0.1, seed=0)

###############################################################################


@pytest.fixture(scope="session")
def small_model_config():
    return ModelConfig(hidden=16, hidden2=8, dropout=0.2, seed=0)


@pytest.fixture(scope="session")
def scene_model_config():
    """Tight posterior for the synthetic scene

    Four labeled nodes carry the summed nll while the KL term covers every
    graph-layer weight. At kappa = 1 the KL pull shrinks the means until a
    class is lost on long runs, so kappa is scaled to 1e-3. A rho of -9
    (sigma ~ 1.2e-4) keeps the sampled networks close to the mean network.
    """
    return ModelConfig(hidden=16, hidden2=8, dropout=0.2, rho_init=-9.0,
                       kl_scale=1e-3, seed=0)


@pytest.fixture(scope="session")
def trained(graph, split, scene_model_config):
    model = BlgcnModel(graph.n_features, graph.num_classes,
                       scene_model_config)
    config = TrainConfig(max_epochs=500, t1=0.9, t2=0.95, seed=0)
    return train(model, graph, split, config)


@pytest.fixture(scope="session")
def budget_trained(graph, split, scene_model_config):
    """The `trained` run with the thresholds switched off"""
    model = BlgcnModel(graph.n_features, graph.num_classes,
                       scene_model_config)
    config = TrainConfig(max_epochs=1000, t1=0.9, t2=0.95, dynamic=False,
                         seed=0)
    return train(model, graph, split, config)

###############################################################################


@pytest.fixture
def fast_run_config(tmp_path):
    """End-to-end settings that finish in seconds"""
    return RunConfig(
        output_dir=str(tmp_path / "run"),
        synth_blob=8,
        synth_gap=4,
        n_segments=40,
        hidden=8,
        hidden2=4,
        max_epochs=30,
        eval_samples=3,
        gan_epochs=5,
    )

###############################################################################
