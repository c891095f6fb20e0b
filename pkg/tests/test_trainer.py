#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for `pyblgcn.trainer`"""

import math
import logging
from types import SimpleNamespace

import numpy as np
import pytest

from pyblgcn.hsi_io import SplitAssignment
from pyblgcn.superpixel import SuperpixelGraph
from pyblgcn.model import BlgcnModel, ModelConfig, nll
from pyblgcn.trainer import (
    TrainConfig, TrainHistory,
    confidence_interval, pseudo_label, gate_accuracy, train, evaluate,
    _refresh_pseudo_labels
)
from pyblgcn.errors import ConfigError, ContractError, NumericalError

###############################################################################


def fresh_model(graph, config):
    return BlgcnModel(graph.n_features, graph.num_classes, config)


def spread_samples(mean, std, n_samples):
    """Alternating samples with the given mean and sample std"""
    offset = std * math.sqrt((n_samples - 1) / n_samples)
    signs = np.resize([1.0, -1.0], n_samples)
    return mean + signs * offset

###############################################################################


def test_confidence_interval():
    ci = confidence_interval(spread_samples(0.95, 0.01, 30))
    assert ci.mean == pytest.approx(0.95)
    assert ci.standard_error == pytest.approx(0.0018257, abs=1e-7)
    assert ci.lower == pytest.approx(0.94642, abs=1e-5)
    assert ci.upper == pytest.approx(0.95358, abs=1e-5)
    assert ci.level == pytest.approx(0.95, abs=1e-4)


def test_confidence_interval_degenerate():
    ci = confidence_interval([0.9] * 30)
    assert (ci.lower, ci.upper) == pytest.approx((0.9, 0.9))
    assert ci.width == pytest.approx(0.0)

    ci = confidence_interval([0.7, 0.9], z=0.0)
    assert ci.lower == ci.mean == ci.upper

    with pytest.raises(ContractError):
        confidence_interval([0.9])


def test_pseudo_label():
    probs = np.array([[0.95, 0.05], [0.85, 0.15], [1.0, 0.0], [0.02, 0.98]])
    assert pseudo_label(probs, [0, 1, 2, 3]) == {0: 1, 2: 1, 3: 2}
    assert pseudo_label(probs, [0, 1, 2, 3], threshold=1.0) == {2: 1}
    assert pseudo_label(probs, [1]) == {}
    with pytest.raises(ContractError):
        pseudo_label(probs, [0], threshold=0.5)


def test_gate_accuracy():
    predicted = np.array([1, 2, 2, 1])
    labels = np.array([1, 2, 1, 1])
    assert gate_accuracy(predicted, labels, [0, 1, 2, 3]) == 0.75
    assert gate_accuracy(predicted, labels, [0, 2, 3], stop_class=1) == \
        pytest.approx(2 / 3)
    assert gate_accuracy(predicted, labels, [0], stop_class=2) == 0.0

###############################################################################


def test_vacuous_thresholds_stop_at_first_epoch(graph, split,
                                                small_model_config):
    config = TrainConfig(max_epochs=5, t1=0.0, t2=0.0, eval_samples=3)
    _, history = train(fresh_model(graph, small_model_config), graph, split,
                       config)
    assert history.n_epochs == 1
    assert history.stop_epoch == 0
    assert history.stop_reason == "dynamic"
    assert len(history.evaluations[0].accuracies) == 3


def test_unreachable_threshold_uses_budget(graph, split, small_model_config):
    config = TrainConfig(max_epochs=7, t1=1.01, t2=1.01)
    _, history = train(fresh_model(graph, small_model_config), graph, split,
                       config)
    assert history.n_epochs == 7
    assert history.stop_epoch == 6
    assert history.stop_reason == "budget"
    assert history.evaluations == []


def test_static_training_ignores_thresholds(graph, split, small_model_config):
    config = TrainConfig(max_epochs=4, t1=0.0, t2=0.0, dynamic=False)
    _, history = train(fresh_model(graph, small_model_config), graph, split,
                       config)
    assert history.n_epochs == 4
    assert history.stop_reason == "budget"


def test_training_is_deterministic(graph, split, small_model_config):
    config = TrainConfig(max_epochs=10, t1=1.01, t2=1.01, seed=3)
    first, history = train(fresh_model(graph, small_model_config), graph,
                           split, config)
    second, again = train(fresh_model(graph, small_model_config), graph,
                          split, config)
    assert history.losses == again.losses
    for name, value in first.named_tensors().items():
        np.testing.assert_array_equal(value, second.named_tensors()[name])


def test_pseudo_labels_are_logged(caplog, graph, split, small_model_config):
    caplog.set_level(logging.INFO)
    config = TrainConfig(max_epochs=3, t1=1.01, t2=1.01, pseudo_start=1,
                         pseudo_every=1, pseudo_threshold=0.51)
    train(fresh_model(graph, small_model_config), graph, split, config)
    refreshed = [m for m in caplog.messages if m.endswith("pseudo-labels.")]
    assert [m.split(":")[0] for m in refreshed] == ["Epoch 1", "Epoch 2"]


class CertainModel:
    """Predicts class 1 with probability one for every node"""

    def __init__(self, graph):
        self.probs = np.zeros((graph.n_nodes, graph.num_classes))
        self.probs[:, 0] = 1.0

    def predict_mc(self, *args, **kwargs):
        return SimpleNamespace(mean_probs=self.probs)


def test_pseudo_labels_keep_ground_truth(graph, split):
    assert set(graph.labels[split.labeled]) != {1}
    config = TrainConfig(pseudo_threshold=0.99)
    targets, index = _refresh_pseudo_labels(
        CertainModel(graph), graph, split, config, epoch=0
    )
    np.testing.assert_array_equal(targets[split.labeled],
                                  graph.labels[split.labeled])
    assert (targets[split.unlabeled] == 1).all()
    np.testing.assert_array_equal(index, np.arange(graph.n_nodes))


def test_divergence_restores_weights(graph, split, small_model_config):
    model = fresh_model(graph, small_model_config)
    initial = {k: v.copy() for k, v in model.named_tensors().items()}
    history = TrainHistory()
    config = TrainConfig(max_epochs=3, lr=1e300, weight_decay=0.0,
                         t1=1.01, t2=1.01)
    with pytest.raises(NumericalError):
        train(model, graph, split, config, history)
    assert history.stop_reason == "numeric"
    assert history.stop_epoch == 0
    for name, value in model.named_tensors().items():
        np.testing.assert_array_equal(value, initial[name])


def test_noiseless_identity_graph_fits_separable_toy():
    rng = np.random.default_rng(0)
    labels = np.repeat([1, 2, 3], 10)
    features = 3.0 * np.eye(3)[labels - 1] + rng.normal(0.0, 0.1, (30, 3))
    complete = np.ones((30, 30)) - np.eye(30)
    toy = SuperpixelGraph(features=features, adjacency=complete,
                          labels=labels)
    split = SplitAssignment(labeled=np.arange(30), unlabeled=[])
    config = ModelConfig(hidden=8, hidden2=8, dropout=0.0, rho_init=-30.0,
                         kl_scale=0.0, identity_graph=True, seed=0)
    model, history = train(
        BlgcnModel(3, 3, config), toy, split,
        TrainConfig(max_epochs=500, lr=0.01, weight_decay=0.0,
                    dynamic=False)
    )
    assert history.n_epochs == 500
    result = model.forward(features, np.random.default_rng(1))
    np.testing.assert_array_equal(result.values.argmax(axis=1) + 1, labels)


def test_split_must_match_graph(graph, small_model_config):
    split = SplitAssignment(labeled=[0], unlabeled=[1])
    with pytest.raises(ContractError):
        train(fresh_model(graph, small_model_config), graph, split,
              TrainConfig(max_epochs=1))


@pytest.mark.parametrize("changes", [
    {"t1": 0.96, "t2": 0.95},
    {"z": 0.0},
    {"max_epochs": 0},
    {"eval_samples": 1},
    {"pseudo_threshold": 0.5},
    {"pseudo_every": 0},
])
def test_invalid_train_config(changes):
    with pytest.raises(ConfigError):
        TrainConfig(**changes)

###############################################################################


def unlabeled_accuracy(model, graph, split):
    evaluation = evaluate(model, graph, split, n_samples=30, seed=1)
    return np.mean(
        evaluation.predictions[split.unlabeled]
        == graph.labels[split.unlabeled]
    )


def test_synthetic_scene_stops_dynamically(trained, graph, split):
    model, history = trained
    assert history.stop_reason == "dynamic"
    assert history.stop_epoch < 500
    final = history.records[-1]
    assert final.val_acc >= 0.9
    assert final.ci.upper >= 0.95
    assert final.ci.width < 0.02
    assert unlabeled_accuracy(model, graph, split) >= 0.99


def test_thresholds_off_trains_longer_for_same_accuracy(
        trained, budget_trained, graph, split):
    # both runs use scene_model_config: kappa = 1e-3, rho_init = -9
    dynamic_model, dynamic = trained
    budget_model, budget = budget_trained
    assert budget.stop_reason == "budget"
    assert budget.n_epochs >= 2 * dynamic.n_epochs
    assert abs(
        unlabeled_accuracy(budget_model, graph, split)
        - unlabeled_accuracy(dynamic_model, graph, split)
    ) <= 0.01


def test_dynamic_stop_matches_history(trained):
    _, history = trained
    for record in history.evaluations:
        assert record.val_acc >= 0.9
        assert record.ci.mean == np.mean(record.accuracies)
        reached = record.ci.upper >= 0.95
        assert reached == (record.epoch == history.stop_epoch)
    for record in history.records:
        if record.ci is None:
            assert record.val_acc < 0.9


def test_training_lowers_labeled_nll(trained, graph, split,
                                     scene_model_config):
    model, _ = trained
    untrained = fresh_model(graph, scene_model_config)
    untrained.attach(graph.adjacency)

    def labeled_nll(candidate):
        probs = candidate.predict_mc(graph.features, 3, seed=0).mean_probs
        probs = np.maximum(probs, 1e-300)
        return nll(np.log(probs), graph.labels, split.labeled).item()

    assert labeled_nll(model) < labeled_nll(untrained)


def test_history_csv(tmp_path, trained):
    _, history = trained
    path = tmp_path / "history.csv"
    text = history.to_csv(path)
    assert path.read_text() == text
    lines = text.splitlines()
    assert len(lines) == history.n_epochs
    assert lines[0].startswith("0,0.001,")
    assert all(len(line.split(",")) in (4, 7) for line in lines)
    assert len(lines[-1].split(",")) == 7

###############################################################################


def test_evaluate_trained(trained, graph, split):
    model, _ = trained
    evaluation = evaluate(model, graph, split, n_samples=30, seed=1)
    assert len(evaluation.accuracies) == 30
    assert evaluation.ci.mean == np.mean(evaluation.accuracies)
    accuracy = np.mean(
        evaluation.predictions[split.unlabeled]
        == graph.labels[split.unlabeled]
    )
    assert accuracy >= 0.9


def test_evaluate_without_weight_noise(graph, split, small_model_config):
    model = fresh_model(graph, small_model_config)
    for layer in (model.bgc1, model.bgc2):
        layer.rho_w.value = np.full(layer.rho_w.shape, -40.0)
        layer.rho_b.value = np.full(layer.rho_b.shape, -40.0)
    evaluation = evaluate(model, graph, split, n_samples=5, seed=0)
    assert evaluation.ci.width == pytest.approx(0.0, abs=1e-12)


def test_evaluate_single_draw(graph, split, small_model_config):
    model = fresh_model(graph, small_model_config)
    evaluation = evaluate(model, graph, split, n_samples=1)
    assert evaluation.ci is None
    assert evaluation.predictions.shape == (graph.n_nodes,)
