#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for `pyblgcn.bayes_layer`"""

import math

import numpy as np
import pytest

from pyblgcn import numgrad as ng
from pyblgcn.bayes_layer import (
    BayesianLinear, HALF_LOG_2PI,
    sample, apply, log_q, log_p, bayes_loss, kl_closed_form, sigma
)
from pyblgcn.errors import ContractError

###############################################################################


def scalar_layer(mu=0.0, rho=0.0, prior_mean=0.0, prior_std=1.0):
    """1x1 weight and bias; the bias has ρ = 0"""
    return BayesianLinear(
        mu_w=ng.parameter([[mu]]),
        rho_w=ng.parameter([[rho]]),
        mu_b=ng.parameter([[0.0]]),
        rho_b=ng.parameter([[0.0]]),
        prior_mean=prior_mean,
        prior_std=prior_std,
    )

###############################################################################


def test_sample_without_noise_is_mean():
    layer = BayesianLinear.create(3, 2, np.random.default_rng(0))
    drawn = sample(layer, epsilon=(np.zeros((3, 2)), np.zeros((1, 2))))
    np.testing.assert_array_equal(drawn.weight.value, layer.mu_w.value)
    np.testing.assert_array_equal(drawn.bias.value, layer.mu_b.value)


def test_sample_unit_noise():
    layer = scalar_layer(mu=1.0, rho=0.0)
    drawn = sample(layer, epsilon=([[1.0]], [[0.0]]))
    assert drawn.weight.item() == pytest.approx(1.0 + math.log(2.0))


def test_sample_spread():
    layer = BayesianLinear(
        mu_w=ng.parameter(np.zeros((1, 100000))),
        rho_w=ng.parameter(np.zeros((1, 100000))),
        mu_b=ng.parameter(np.zeros((1, 100000))),
        rho_b=ng.parameter(np.zeros((1, 100000))),
    )
    drawn = sample(layer, np.random.default_rng(5))
    spread = drawn.weight.value.std()
    assert abs(spread - math.log(2.0)) < 3 / math.sqrt(1e5) * math.log(2.0)


def test_sample_needs_noise_source():
    with pytest.raises(ContractError):
        sample(scalar_layer())


def test_sigma_is_positive():
    assert np.all(sigma([-40.0, 0.0, 40.0]) > 0)
    assert sigma(0.0) == pytest.approx(math.log(2.0))


def test_apply():
    layer = BayesianLinear(
        mu_w=ng.parameter([[1.0, 2.0], [3.0, 4.0]]),
        rho_w=ng.parameter(np.zeros((2, 2))),
        mu_b=ng.parameter([[0.5, -0.5]]),
        rho_b=ng.parameter(np.zeros((1, 2))),
    )
    drawn = sample(layer, epsilon=(np.zeros((2, 2)), np.zeros((1, 2))))
    out = apply(ng.constant([[1.0, 1.0]]), drawn)
    np.testing.assert_allclose(out.value, [[4.5, 5.5]])

###############################################################################


def test_log_q_at_mean():
    # σ = 1 needs ρ = log(e - 1)
    layer = scalar_layer(mu=0.3, rho=math.log(math.e - 1.0))
    drawn = sample(layer, epsilon=([[0.0]], [[0.0]]))
    bias_term = -HALF_LOG_2PI - math.log(math.log(2.0))
    assert log_q(layer, drawn).item() == pytest.approx(
        -HALF_LOG_2PI + bias_term, abs=1e-12
    )


def test_log_q_one_std_away():
    rho = 0.7
    std = math.log1p(math.exp(rho))
    layer = scalar_layer(mu=-1.0, rho=rho)
    drawn = sample(layer, epsilon=([[1.0]], [[0.0]]))
    bias_term = -HALF_LOG_2PI - math.log(math.log(2.0))
    expected = -HALF_LOG_2PI - math.log(std) - 0.5 + bias_term
    assert log_q(layer, drawn).item() == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("omega,expected", [
    (0.0, -HALF_LOG_2PI),
    (2.0, -HALF_LOG_2PI - 2.0),
])
def test_log_p(omega, expected):
    layer = scalar_layer(mu=omega, rho=0.0)
    drawn = sample(layer, epsilon=([[0.0]], [[0.0]]))
    # the bias is drawn at 0, contributing -½ln(2π)
    assert log_p(layer, drawn).item() == pytest.approx(
        expected - HALF_LOG_2PI, abs=1e-12
    )


def test_log_densities_match_direct_sum():
    rng = np.random.default_rng(2)
    layer = BayesianLinear.create(4, 3, rng, rho_init=-1.0, prior_std=0.5)
    drawn = sample(layer, rng)

    def density(x, mean, std):
        return np.sum(
            -HALF_LOG_2PI - np.log(std) - 0.5 * ((x - mean) / std) ** 2
        )

    weight_std, bias_std = layer.sigma()
    expected_q = (
        density(drawn.weight.value, layer.mu_w.value, weight_std)
        + density(drawn.bias.value, layer.mu_b.value, bias_std)
    )
    expected_p = (
        density(drawn.weight.value, 0.0, 0.5)
        + density(drawn.bias.value, 0.0, 0.5)
    )
    assert log_q(layer, drawn).item() == pytest.approx(expected_q, abs=1e-12)
    assert log_p(layer, drawn).item() == pytest.approx(expected_p, abs=1e-12)

###############################################################################


def test_bayes_loss():
    assert bayes_loss(-3.0, -5.0, 2.0, 1.0) == pytest.approx(4.0)
    assert bayes_loss(-3.0, -5.0, 2.0, 0.0) == pytest.approx(2.0)
    node = bayes_loss(ng.constant(-3.0), -5.0, 2.0, 0.5)
    assert node.item() == pytest.approx(3.0)


def test_monte_carlo_kl_matches_closed_form():
    mu, rho = 0.4, -0.3
    layer = scalar_layer(mu=mu, rho=rho)
    rng = np.random.default_rng(11)
    estimates = []
    for _ in range(10000):
        drawn = sample(layer, epsilon=(rng.standard_normal((1, 1)),
                                       np.zeros((1, 1))))
        estimates.append(log_q(layer, drawn).item()
                         - log_p(layer, drawn).item())
    estimates = np.array(estimates)
    standard_error = estimates.std(ddof=1) / math.sqrt(estimates.size)

    # the bias is pinned at 0 with σ = ln 2, prior N(0, 1)
    bias_gap = -math.log(math.log(2.0))
    expected = kl_closed_form(mu, sigma(rho)) + bias_gap
    assert abs(estimates.mean() - expected) < 3 * standard_error


def test_gradients_reach_mu_and_rho():
    layer = scalar_layer(mu=0.2, rho=-1.0)
    drawn = sample(layer, epsilon=([[0.5]], [[0.0]]))
    loss = ng.total(apply(ng.constant([[2.0]]), drawn))
    grads = ng.backward(loss)
    assert grads[layer.mu_w][0, 0] == pytest.approx(2.0)
    slope = 1.0 / (1.0 + math.exp(1.0))
    assert grads[layer.rho_w][0, 0] == pytest.approx(2.0 * 0.5 * slope)


def test_invalid_prior():
    with pytest.raises(ContractError):
        scalar_layer(prior_std=0.0)
