#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Bayesian Linear Layer

Weights and biases are independent Gaussians q(ω|θ) = N(μ, σ²) with
σ = log(1 + e^ρ). A forward pass draws ω = μ + σ ⊙ ε with ε ~ N(0, 1) so that
gradients reach μ and ρ. The variational loss is estimated from the drawn
weights:

    loss = κ · (Σ log q(ω|θ) − Σ log p(ω)) + nll

with a shared Gaussian prior p(ω) = N(μ_p, σ_p²).
"""

###############################################################################

import math
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import numgrad as ng
from .numgrad import GradNode
from .errors import ContractError
from .constants import (
    DEFAULT_PRIOR_MEAN,
    DEFAULT_PRIOR_STD,
    DEFAULT_RHO_INIT,
    DEFAULT_KL_SCALE,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

###############################################################################


def sigma(rho) -> np.ndarray:
    """σ = log(1 + e^ρ), strictly positive for every finite ρ"""
    return np.logaddexp(0.0, np.asarray(rho, dtype=np.float64))


def glorot_limit(n_in: int, n_out: int) -> float:
    return math.sqrt(6.0 / (n_in + n_out))


@dataclass(eq=False)
class BayesianLinear:
    """Linear layer with Gaussian weights and biases

    Attributes
    ----------
    mu_w, rho_w : GradNode
        n_in x n_out variational parameters of the weights
    mu_b, rho_b : GradNode
        1 x n_out variational parameters of the biases
    prior_mean, prior_std : float
        Shared Gaussian prior of every weight and bias
    name : str
        Prefix of the parameter names
    """
    mu_w: GradNode = field(repr=False)
    rho_w: GradNode = field(repr=False)
    mu_b: GradNode = field(repr=False)
    rho_b: GradNode = field(repr=False)
    prior_mean: float = DEFAULT_PRIOR_MEAN
    prior_std: float = DEFAULT_PRIOR_STD
    name: str = "bayes"

    def __post_init__(self):
        if self.prior_std <= 0:
            raise ContractError(
                f"Prior standard deviation must be positive, "
                f"got {self.prior_std}"
            )
        if self.mu_w.shape != self.rho_w.shape:
            raise ContractError("μ and ρ of the weights differ in shape.")
        if not (self.mu_b.shape == self.rho_b.shape == (1, self.n_out)):
            raise ContractError("Bias parameters must be 1 x n_out.")

    @classmethod
    def create(
        cls,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        rho_init: float = DEFAULT_RHO_INIT,
        prior_mean: float = DEFAULT_PRIOR_MEAN,
        prior_std: float = DEFAULT_PRIOR_STD,
        name: str = "bayes"
    ) -> "BayesianLinear":
        """Glorot-uniform μ_W, zero μ_b and constant ρ"""
        limit = glorot_limit(n_in, n_out)
        return cls(
            mu_w=ng.parameter(rng.uniform(-limit, limit, (n_in, n_out)),
                              name=f"{name}.mu_w"),
            rho_w=ng.parameter(np.full((n_in, n_out), rho_init),
                               name=f"{name}.rho_w"),
            mu_b=ng.parameter(np.zeros((1, n_out)), name=f"{name}.mu_b"),
            rho_b=ng.parameter(np.full((1, n_out), rho_init),
                               name=f"{name}.rho_b"),
            prior_mean=prior_mean,
            prior_std=prior_std,
            name=name,
        )

    @property
    def n_in(self) -> int:
        return self.mu_w.shape[0]

    @property
    def n_out(self) -> int:
        return self.mu_w.shape[1]

    def parameters(self) -> List[GradNode]:
        return [self.mu_w, self.rho_w, self.mu_b, self.rho_b]

    def sigma(self) -> Tuple[np.ndarray, np.ndarray]:
        """Current standard deviations of the weights and the biases"""
        return sigma(self.rho_w.value), sigma(self.rho_b.value)

    def __repr__(self) -> str:
        return (
            f"BayesianLinear(name={self.name!r}, in={self.n_in}, "
            f"out={self.n_out}, prior=N({self.prior_mean}, "
            f"{self.prior_std}²))"
        )


@dataclass(eq=False)
class WeightSample:
    """Weights drawn for one forward pass, with the noise that produced them"""
    weight: GradNode = field(repr=False)
    bias: GradNode = field(repr=False)
    epsilon_w: np.ndarray = field(repr=False)
    epsilon_b: np.ndarray = field(repr=False)

###############################################################################


def _reparameterize(mu: GradNode, rho: GradNode, epsilon) -> GradNode:
    epsilon = ng.as_matrix(epsilon)
    if epsilon.shape != mu.shape:
        raise ContractError(
            f"Noise of shape {epsilon.shape} does not match {mu.shape}"
        )
    return ng.add(mu, ng.hadamard(ng.softplus(rho), ng.constant(epsilon)))


def sample(
    layer: BayesianLinear,
    rng: np.random.Generator = None,
    epsilon: Tuple[np.ndarray, np.ndarray] = None
) -> WeightSample:
    """Draw ω = μ + log(1 + e^ρ) ⊙ ε for the weights and the biases

    Parameters
    ----------
    layer : BayesianLinear
        Layer to draw from
    rng : numpy.random.Generator, optional
        Source of ε; required unless `epsilon` is given.
        The default is None.
    epsilon : tuple, optional
        Explicit (ε_W, ε_b). Fixing the noise makes the draw a deterministic
        function of μ and ρ.
        The default is None.

    Returns
    -------
    WeightSample
        The drawn weights, differentiable with respect to μ and ρ
    """
    if epsilon is None:
        if rng is None:
            raise ContractError("sample() needs a generator or noise.")
        epsilon = (
            rng.standard_normal(layer.mu_w.shape),
            rng.standard_normal(layer.mu_b.shape),
        )
    epsilon_w, epsilon_b = (ng.as_matrix(e) for e in epsilon)
    return WeightSample(
        weight=_reparameterize(layer.mu_w, layer.rho_w, epsilon_w),
        bias=_reparameterize(layer.mu_b, layer.rho_b, epsilon_b),
        epsilon_w=epsilon_w,
        epsilon_b=epsilon_b,
    )


def apply(layer_input, drawn: WeightSample) -> GradNode:
    """H·W + b with the drawn weights"""
    return ng.add_row(ng.matmul(layer_input, drawn.weight), drawn.bias)

###############################################################################
# Log densities


def _gaussian_log_density(omega: GradNode, mu, log_std) -> GradNode:
    """Σ log N(ω; μ, σ²) with σ given through log σ"""
    n_values = omega.value.size
    inverse_std = ng.exp(ng.scale(log_std, -1.0))
    z = ng.hadamard(ng.add(omega, ng.scale(mu, -1.0)), inverse_std)
    density = ng.add(
        ng.scale(ng.total(ng.hadamard(z, z)), -0.5),
        ng.scale(ng.total(log_std), -1.0),
    )
    return ng.add(density, ng.constant(-HALF_LOG_2PI * n_values))


def log_q(layer: BayesianLinear, drawn: WeightSample) -> GradNode:
    """Σ log q(ω|θ) over the weights and biases of a draw (1x1 node)"""
    return ng.add(
        _gaussian_log_density(
            drawn.weight, layer.mu_w, ng.log(ng.softplus(layer.rho_w))
        ),
        _gaussian_log_density(
            drawn.bias, layer.mu_b, ng.log(ng.softplus(layer.rho_b))
        ),
    )


def log_p(layer: BayesianLinear, drawn: WeightSample) -> GradNode:
    """Σ log p(ω) under the shared prior N(μ_p, σ_p²) (1x1 node)"""
    log_std = math.log(layer.prior_std)
    parts = []
    for omega in (drawn.weight, drawn.bias):
        parts.append(_gaussian_log_density(
            omega,
            ng.constant(np.full(omega.shape, layer.prior_mean)),
            ng.constant(np.full(omega.shape, log_std)),
        ))
    return ng.add(*parts)


def bayes_loss(
    sum_log_q,
    sum_log_p,
    nll,
    kl_scale: float = DEFAULT_KL_SCALE
) -> GradNode or float:
    """κ · (Σ log q − Σ log p) + nll

    Accepts 1x1 nodes or plain numbers; with plain numbers only, the result
    is a float.
    """
    is_node = any(
        isinstance(term, GradNode) for term in (sum_log_q, sum_log_p, nll)
    )
    complexity = ng.add(sum_log_q, ng.scale(sum_log_p, -1.0))
    loss = ng.add(ng.scale(complexity, kl_scale), nll)
    return loss if is_node else loss.item()


def kl_closed_form(
    mu,
    std,
    prior_mean: float = DEFAULT_PRIOR_MEAN,
    prior_std: float = DEFAULT_PRIOR_STD
) -> float:
    """Σ KL(N(μ, σ²) ‖ N(μ_p, σ_p²)), summed over all entries"""
    mu = np.asarray(mu, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    kl = (
        np.log(prior_std / std)
        + (std ** 2 + (mu - prior_mean) ** 2) / (2.0 * prior_std ** 2)
        - 0.5
    )
    return float(kl.sum())


def layer_kl(layer: BayesianLinear) -> float:
    """Analytic KL of a layer's posterior to its prior (for diagnostics)"""
    return sum(
        kl_closed_form(
            mu.value, sigma(rho.value), layer.prior_mean, layer.prior_std
        )
        for mu, rho in ((layer.mu_w, layer.rho_w), (layer.mu_b, layer.rho_b))
    )

###############################################################################
