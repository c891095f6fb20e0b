#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Dense Matrix Arithmetic with Reverse-Mode Gradients

A small engine: every value is a 2-D float64 `numpy.ndarray`
wrapped in a `GradNode`, and only the operations the classification pipeline
needs are provided (matrix product, a handful of entrywise operations,
row-wise log-softmax and full reduction). `backward()` sweeps the recorded
graph in reverse topological order.

The module also holds the Adam optimiser with decoupled weight decay and the
multistep learning-rate schedule.
"""

###############################################################################

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .errors import ContractError, DimensionError, NumericalError
from .constants import (
    ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
    DEFAULT_LR, DEFAULT_GAMMA, DEFAULT_MILESTONES
)

###############################################################################

LOGGER = logging.getLogger(__name__)

Matrix = np.ndarray

# products with every dimension up to this size are accumulated in a fixed
# k-order, making them independent of the BLAS kernel
EXACT_MATMUL_LIMIT = 64

###############################################################################


def as_matrix(value) -> Matrix:
    """Coerce scalars, vectors and nested lists to a 2-D float64 matrix"""
    matrix = np.array(value, dtype=np.float64)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    elif matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    elif matrix.ndim > 2:
        raise DimensionError(f"expected a matrix, got shape {matrix.shape}")
    return matrix


def _check_finite(value: Matrix, op: str) -> Matrix:
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"Operation '{op}' produced non-finite values.")
    return value

###############################################################################


class GradNode:
    """Node of a recorded computation

    Parameters
    ----------
    value : Matrix
        Result of the operation
    op : str, optional
        Operation tag.
        The default is "leaf".
    parents : tuple, optional
        Input nodes of the operation.
        The default is ().
    backward : callable, optional
        Maps the gradient of this node to a tuple of parent gradients.
        The default is None.
    requires_grad : bool, optional
        True for trainable leaves and for every node computed from one.
        The default is False.
    name : str, optional
        Name of the parameter (leaves only).
        The default is None.
    """
    __slots__ = (
        "value", "op", "parents", "grad", "requires_grad", "name", "_backward"
    )

    def __init__(
        self,
        value,
        op: str = "leaf",
        parents: Tuple["GradNode", ...] = (),
        backward: Callable = None,
        requires_grad: bool = False,
        name: str = None
    ):
        self.value = as_matrix(value)
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def item(self) -> float:
        """Value of a 1x1 node as a Python float"""
        if self.value.shape != (1, 1):
            raise ContractError(
                f"item() requires a scalar node, got shape {self.value.shape}"
            )
        return float(self.value[0, 0])

    def __matmul__(self, other: "GradNode") -> "GradNode":
        return matmul(self, other)

    def __add__(self, other: "GradNode") -> "GradNode":
        return add(self, other)

    def __mul__(self, other: "GradNode") -> "GradNode":
        return hadamard(self, other)

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"<GradNode {label} {self.shape[0]}x{self.shape[1]}>"


def parameter(value, name: str = None) -> GradNode:
    """Trainable leaf"""
    return GradNode(_check_finite(as_matrix(value), "parameter"),
                    requires_grad=True, name=name)


def constant(value) -> GradNode:
    """Leaf that receives no gradient"""
    return GradNode(_check_finite(as_matrix(value), "constant"))


def _wrap(value) -> GradNode:
    return value if isinstance(value, GradNode) else constant(value)


def _record(
    value: Matrix,
    op: str,
    parents: Tuple[GradNode, ...],
    backward: Callable
) -> GradNode:
    requires_grad = any(parent.requires_grad for parent in parents)
    return GradNode(
        _check_finite(value, op),
        op=op,
        parents=parents,
        backward=backward if requires_grad else None,
        requires_grad=requires_grad
    )


def _same_shape(a: GradNode, b: GradNode, op: str):
    if a.shape != b.shape:
        raise DimensionError(
            f"Operation '{op}' needs equal shapes, got {a.shape} and {b.shape}"
        )

###############################################################################
# Operations


def _ordered_product(a: Matrix, b: Matrix) -> Matrix:
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k:k + 1] * b[k:k + 1, :]
    return out


def matmul(a, b) -> GradNode:
    """Matrix product `a @ b`

    Raises
    ------
    DimensionError
        If `a.cols != b.rows`; the message names both shapes.
    """
    a, b = _wrap(a), _wrap(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"Cannot multiply matrices of shapes {a.shape} and {b.shape}"
        )
    if max(a.shape + b.shape) <= EXACT_MATMUL_LIMIT:
        value = _ordered_product(a.value, b.value)
    else:
        value = a.value @ b.value

    def backward(grad):
        return grad @ b.value.T, a.value.T @ grad

    return _record(value, "matmul", (a, b), backward)


def add(a, b) -> GradNode:
    a, b = _wrap(a), _wrap(b)
    _same_shape(a, b, "add")
    return _record(a.value + b.value, "add", (a, b), lambda g: (g, g))


def add_row(a, row) -> GradNode:
    """Add a 1xk row to every row of an nxk matrix (bias term)"""
    a, row = _wrap(a), _wrap(row)
    if row.shape != (1, a.shape[1]):
        raise DimensionError(
            f"Cannot broadcast row of shape {row.shape} over {a.shape}"
        )

    def backward(grad):
        return grad, grad.sum(axis=0, keepdims=True)

    return _record(a.value + row.value, "add_row", (a, row), backward)


def hadamard(a, b) -> GradNode:
    a, b = _wrap(a), _wrap(b)
    _same_shape(a, b, "hadamard")

    def backward(grad):
        return grad * b.value, grad * a.value

    return _record(a.value * b.value, "hadamard", (a, b), backward)


def scale(a, factor: float) -> GradNode:
    a = _wrap(a)
    factor = float(factor)
    return _record(a.value * factor, "scale", (a,), lambda g: (g * factor,))


def relu(a) -> GradNode:
    a = _wrap(a)
    mask = (a.value > 0).astype(np.float64)
    return _record(a.value * mask, "relu", (a,), lambda g: (g * mask,))


def softplus(a) -> GradNode:
    """log(1 + e^a), evaluated without overflow"""
    a = _wrap(a)
    value = np.logaddexp(0.0, a.value)
    slope = expit(a.value)
    return _record(value, "softplus", (a,), lambda g: (g * slope,))


def log(a) -> GradNode:
    a = _wrap(a)
    if np.any(a.value <= 0):
        raise NumericalError("Logarithm of a non-positive entry.")
    return _record(np.log(a.value), "log", (a,), lambda g: (g / a.value,))


def exp(a) -> GradNode:
    a = _wrap(a)
    value = np.exp(a.value)
    return _record(value, "exp", (a,), lambda g: (g * value,))


def total(a) -> GradNode:
    """Sum of all entries as a 1x1 node"""
    a = _wrap(a)
    value = np.array([[a.value.sum()]])

    def backward(grad):
        return (np.full_like(a.value, grad[0, 0]),)

    return _record(value, "sum", (a,), backward)


def log_softmax_rows(m) -> GradNode:
    """Row-wise log-softmax with max subtraction"""
    m = _wrap(m)
    shifted = m.value - m.value.max(axis=1, keepdims=True)
    value = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probabilities = np.exp(value)

    def backward(grad):
        return (grad - probabilities * grad.sum(axis=1, keepdims=True),)

    return _record(value, "log_softmax", (m,), backward)


ELEMENTWISE_OPS: Dict[str, Callable] = {
    "add": add,
    "hadamard": hadamard,
    "relu": relu,
    "softplus": softplus,
    "log": log,
    "exp": exp,
    "scale": scale,
}


def elementwise(op: str, *args, **kwargs) -> GradNode:
    """Dispatch an entrywise operation by name

    Parameters
    ----------
    op : str
        One of 'add', 'hadamard', 'relu', 'softplus', 'log', 'exp', 'scale'
    *args
        Operands (and the factor, for 'scale')
    """
    try:
        function = ELEMENTWISE_OPS[op]
    except KeyError:
        raise ContractError(f"Unknown entrywise operation '{op}'.") from None
    return function(*args, **kwargs)

###############################################################################
# Reverse sweep


def _topological_order(root: GradNode) -> List[GradNode]:
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: GradNode) -> Dict[GradNode, Matrix]:
    """Propagate gradients from a scalar root

    Gradients of all reachable nodes are reset before the sweep, so after the
    call `node.grad` holds d(root)/d(node) for this root only.

    Returns
    -------
    dict
        Map of every reachable trainable leaf to its gradient

    Raises
    ------
    ContractError
        If the root is not 1x1.
    """
    if root.shape != (1, 1):
        raise ContractError(
            f"backward() requires a scalar root, got shape {root.shape}"
        )
    order = _topological_order(root)
    for node in order:
        if node.requires_grad:
            node.zero_grad()
    root.grad = np.ones((1, 1))

    for node in reversed(order):
        if node._backward is None:
            continue
        parent_grads = node._backward(node.grad)
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent.requires_grad:
                parent.grad += parent_grad

    return {
        node: node.grad
        for node in order
        if node.requires_grad and node.op == "leaf"
    }

###############################################################################
# Optimisation


@dataclass
class AdamState:
    """Moment estimates of the Adam optimiser"""
    m: List[Matrix] = field(default_factory=list)
    v: List[Matrix] = field(default_factory=list)
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def for_params(cls, params: Sequence[GradNode], **kwargs) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.value) for p in params],
            v=[np.zeros_like(p.value) for p in params],
            **kwargs
        )


def adam_step(
    params: Sequence[GradNode],
    grads: Sequence[Matrix],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
    decay_mask: Sequence[bool] = None
) -> Sequence[GradNode]:
    """One Adam update with bias correction and decoupled weight decay

    Parameters
    ----------
    params : list
        Parameter nodes, updated in place (their `value` is rebound)
    grads : list
        Gradients, one per parameter
    state : AdamState
        Moment estimates, advanced by one step
    lr : float
        Learning rate
    weight_decay : float, optional
        Decoupled decay rate λ; the term lr·λ·w is subtracted from every
        parameter selected by `decay_mask`.
        The default is 0.0.
    decay_mask : list of bool, optional
        Which parameters are decayed. If None, all are.
        The default is None.

    Returns
    -------
    list
        The updated parameters
    """
    if len(params) != len(grads):
        raise ContractError("Need exactly one gradient per parameter.")
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    if decay_mask is None:
        decay_mask = [True] * len(params)

    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t

    for idx, (param, grad) in enumerate(zip(params, grads)):
        if grad.shape != param.shape or state.m[idx].shape != param.shape:
            raise DimensionError(
                f"Gradient {grad.shape} does not match parameter {param.shape}"
            )
        m = state.beta1 * state.m[idx] + (1.0 - state.beta1) * grad
        v = state.beta2 * state.v[idx] + (1.0 - state.beta2) * grad * grad
        state.m[idx], state.v[idx] = m, v

        update = lr * (m / correction1) / (np.sqrt(v / correction2)
                                           + state.epsilon)
        if decay_mask[idx] and weight_decay:
            update = update + lr * weight_decay * param.value
        param.value = _check_finite(param.value - update, "adam")

    return params


class Adam:
    """Adam optimiser bound to a fixed list of parameters"""

    def __init__(
        self,
        params: Iterable[GradNode],
        weight_decay: float = 0.0,
        decay_mask: Sequence[bool] = None
    ):
        self.params = list(params)
        self.weight_decay = weight_decay
        self.decay_mask = decay_mask
        self.state = AdamState.for_params(self.params)

    def step(self, lr: float):
        grads = [
            p.grad if p.grad is not None else np.zeros_like(p.value)
            for p in self.params
        ]
        adam_step(
            self.params, grads, self.state, lr,
            weight_decay=self.weight_decay,
            decay_mask=self.decay_mask
        )

###############################################################################
# Learning-rate schedule


@dataclass(frozen=True)
class MultiStepSchedule:
    """Learning rate decayed by `gamma` at every milestone epoch"""
    lr: float = DEFAULT_LR
    gamma: float = DEFAULT_GAMMA
    milestones: Tuple[int, ...] = DEFAULT_MILESTONES

    def lr_at(self, epoch: int) -> float:
        return lr_at(epoch, self)


def lr_at(epoch: int, schedule: MultiStepSchedule) -> float:
    """lr₀ · γ^(number of milestones <= epoch)"""
    if epoch < 0:
        raise ContractError(f"Epoch must be non-negative, got {epoch}")
    passed = sum(1 for milestone in schedule.milestones if milestone <= epoch)
    return schedule.lr * schedule.gamma ** passed

###############################################################################
