#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for `pyblgcn.numgrad`"""

import math

import numpy as np
import pytest

from pyblgcn import numgrad as ng
from pyblgcn.errors import ContractError, DimensionError, NumericalError

###############################################################################


def numeric_gradient(loss_of, value, step=1e-5):
    """Central differences of a scalar function of one matrix"""
    grad = np.zeros_like(value)
    for idx in np.ndindex(value.shape):
        plus, minus = value.copy(), value.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (loss_of(plus) - loss_of(minus)) / (2 * step)
    return grad


def relative_error(analytic, numeric):
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-3)
    return float(np.max(np.abs(analytic - numeric) / scale))

###############################################################################


@pytest.mark.parametrize("a,b,result", [
    ([[1, 2], [3, 4]], [[1], [1]], [[3], [7]]),
    (np.eye(2), [[5, 6], [7, 8]], [[5, 6], [7, 8]]),
])
def test_matmul(a, b, result):
    np.testing.assert_array_equal(ng.matmul(a, b).value, result)


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    expected = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                expected[i, j] += a[i, k] * b[k, j]
    np.testing.assert_allclose(ng.matmul(a, b).value, expected, atol=1e-12)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        ng.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_elementwise():
    assert ng.elementwise("softplus", 0.0).item() == pytest.approx(math.log(2))
    np.testing.assert_array_equal(
        ng.elementwise("relu", [-1.0, 0.0, 2.0]).value, [[0, 0, 2]]
    )
    full = np.arange(1.0, 10.0).reshape(3, 3)
    diagonal = ng.elementwise("hadamard", full, np.eye(3)).value
    np.testing.assert_array_equal(diagonal, np.diag(np.diag(full)))
    assert ng.elementwise("scale", 2.0, 3).item() == 6.0


def test_elementwise_errors():
    with pytest.raises(NumericalError):
        ng.log([[1.0, 0.0]])
    with pytest.raises(DimensionError):
        ng.add(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(ContractError):
        ng.elementwise("tanh", 1.0)


def test_log_softmax_rows():
    np.testing.assert_allclose(
        ng.log_softmax_rows([[0.0, 0.0]]).value, [[-math.log(2)] * 2]
    )
    stable = ng.log_softmax_rows([[1000.0, 0.0]]).value
    assert np.all(np.isfinite(stable))
    assert stable[0, 0] == pytest.approx(0.0)

    rows = np.random.default_rng(0).normal(size=(4, 3))
    sums = np.exp(ng.log_softmax_rows(rows).value).sum(axis=1)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)

###############################################################################


def test_backward_simple():
    weight = ng.parameter(np.random.default_rng(0).normal(size=(3, 2)))
    grads = ng.backward(ng.total(weight))
    np.testing.assert_array_equal(grads[weight], np.ones((3, 2)))

    negative = ng.parameter(-np.ones((2, 2)))
    grads = ng.backward(ng.total(ng.relu(negative)))
    np.testing.assert_array_equal(grads[negative], np.zeros((2, 2)))


def test_backward_requires_scalar_root():
    with pytest.raises(ContractError):
        ng.backward(ng.parameter(np.ones((2, 2))))


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    inputs = rng.normal(size=(4, 3))
    weight_value = rng.normal(size=(3, 5))
    bias_value = rng.normal(size=(1, 5))
    second_value = rng.uniform(0.5, 1.5, size=(4, 5))
    readout = rng.normal(size=(4, 5))

    def build(weight, bias, second):
        hidden = ng.add_row(ng.matmul(inputs, weight), bias)
        mixed = ng.add(
            ng.softplus(hidden),
            ng.hadamard(ng.exp(ng.scale(hidden, 0.1)), second)
        )
        out = ng.log_softmax_rows(ng.add(mixed, ng.log(second)))
        return ng.total(ng.hadamard(out, readout))

    weight = ng.parameter(weight_value)
    bias = ng.parameter(bias_value)
    second = ng.parameter(second_value)
    grads = ng.backward(build(weight, bias, second))

    def loss_weight(value):
        return build(ng.constant(value), bias_value, second_value).item()

    def loss_second(value):
        return build(weight_value, bias_value, ng.constant(value)).item()

    assert relative_error(
        grads[weight], numeric_gradient(loss_weight, weight_value)
    ) < 1e-4
    assert relative_error(
        grads[second], numeric_gradient(loss_second, second_value)
    ) < 1e-4

###############################################################################


def test_adam_zero_gradient_keeps_params():
    param = ng.parameter([[1.0, -2.0]])
    state = ng.AdamState()
    ng.adam_step([param], [np.zeros((1, 2))], state, lr=0.1)
    np.testing.assert_array_equal(param.value, [[1.0, -2.0]])


def test_adam_first_step():
    param = ng.parameter([[0.5]])
    state = ng.AdamState()
    ng.adam_step([param], [np.ones((1, 1))], state, lr=0.01)
    assert param.item() == pytest.approx(0.5 - 0.01, abs=1e-9)


def test_adam_parameters_are_independent():
    grads = [np.full((1, 1), 0.3), np.full((2, 1), -1.2)]
    first = [ng.parameter([[1.0]]), ng.parameter([[2.0], [3.0]])]
    second = [ng.parameter([[2.0], [3.0]]), ng.parameter([[1.0]])]
    ng.adam_step(first, grads, ng.AdamState(), lr=0.05)
    ng.adam_step(second, grads[::-1], ng.AdamState(), lr=0.05)
    np.testing.assert_array_equal(first[0].value, second[1].value)
    np.testing.assert_array_equal(first[1].value, second[0].value)


def test_adam_decoupled_weight_decay_mask():
    decayed = ng.parameter([[2.0]])
    kept = ng.parameter([[2.0]])
    optimizer = ng.Adam([decayed, kept], weight_decay=0.5,
                        decay_mask=[True, False])
    optimizer.step(0.1)
    assert decayed.item() == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)
    assert kept.item() == 2.0

###############################################################################


@pytest.mark.parametrize("epoch,lr", [
    (0, 1e-3),
    (1499, 1e-3),
    (1500, 9e-4),
    (2500, 8.1e-4),
    (3500, 7.29e-4),
])
def test_lr_at(epoch, lr):
    assert ng.lr_at(epoch, ng.MultiStepSchedule()) == pytest.approx(lr)


def test_lr_at_negative_epoch():
    with pytest.raises(ContractError):
        ng.MultiStepSchedule().lr_at(-1)
