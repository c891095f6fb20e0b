#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Training with the Dynamic Control Strategy

Each epoch takes one full-graph Adam step on the variational loss over the
labeled (and pseudo-labeled) nodes. A single-sample validation accuracy is
then measured on the unlabeled nodes. Once it reaches T1, the weights are
frozen and evaluated `eval_samples` times; training stops as soon as the
upper bound of the confidence interval of those accuracies reaches T2.
"""

###############################################################################

import math
import logging
from pathlib import Path
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.stats import norm

from . import numgrad as ng
from .model import BlgcnModel
from .hsi_io import SplitAssignment
from .superpixel import SuperpixelGraph
from .errors import ConfigError, ContractError, NumericalError
from .utils import make_rng, sample_std
from .constants import (
    DEFAULT_MAX_EPOCHS, DEFAULT_LR, DEFAULT_GAMMA, DEFAULT_MILESTONES,
    DEFAULT_WEIGHT_DECAY,
    DEFAULT_T1, DEFAULT_T2, DEFAULT_Z,
    DEFAULT_EVAL_SAMPLES, DEFAULT_TRAIN_SAMPLES,
    DEFAULT_PSEUDO_THRESHOLD, DEFAULT_PSEUDO_START, DEFAULT_PSEUDO_EVERY,
    DEFAULT_PSEUDO_SAMPLES,
    STOP_DYNAMIC, STOP_BUDGET, STOP_NUMERIC,
    DEFAULT_SEED,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

# generator streams derived from the training seed
STREAM_TRAIN = 0
STREAM_VALIDATE = 1
STREAM_EVALUATE = 2
STREAM_PSEUDO = 3

###############################################################################


@dataclass
class TrainConfig:
    """Optimisation, pseudo-labelling and stopping parameters

    `stop_class` selects the accuracy feeding both gates: 0 for the accuracy
    over all unlabeled nodes, or a class id for the accuracy on the unlabeled
    nodes of that class. With `dynamic` off the thresholds are
    ignored and training always uses the full epoch budget.
    """
    max_epochs: int = DEFAULT_MAX_EPOCHS
    lr: float = DEFAULT_LR
    gamma: float = DEFAULT_GAMMA
    milestones: Tuple[int, ...] = DEFAULT_MILESTONES
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    t1: float = DEFAULT_T1
    t2: float = DEFAULT_T2
    z: float = DEFAULT_Z
    dynamic: bool = True
    eval_samples: int = DEFAULT_EVAL_SAMPLES
    train_samples: int = DEFAULT_TRAIN_SAMPLES
    pseudo_threshold: float = DEFAULT_PSEUDO_THRESHOLD
    pseudo_start: int = DEFAULT_PSEUDO_START
    pseudo_every: int = DEFAULT_PSEUDO_EVERY
    pseudo_samples: int = DEFAULT_PSEUDO_SAMPLES
    stop_class: int = 0
    kl_scale: float = None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        self.milestones = tuple(int(m) for m in self.milestones)
        if self.t1 > self.t2:
            raise ConfigError(
                f"Threshold T1 ({self.t1}) must not exceed T2 ({self.t2})"
            )
        if self.z <= 0:
            raise ConfigError(f"Standard score must be positive, got {self.z}")
        if self.max_epochs < 1:
            raise ConfigError("At least one training epoch is required.")
        if self.eval_samples < 2:
            raise ConfigError("Confidence intervals need >= 2 eval samples.")
        if self.train_samples < 1 or self.pseudo_samples < 1:
            raise ConfigError("Sample counts must be positive.")
        if not 0.5 < self.pseudo_threshold <= 1:
            raise ConfigError(
                f"Pseudo-label threshold must lie in (0.5, 1], "
                f"got {self.pseudo_threshold}"
            )
        if self.pseudo_every < 1:
            raise ConfigError("Pseudo-label refresh period must be >= 1.")

    @property
    def schedule(self) -> ng.MultiStepSchedule:
        return ng.MultiStepSchedule(self.lr, self.gamma, self.milestones)


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    standard_error: float
    lower: float
    upper: float
    level: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __str__(self) -> str:
        return (
            f"{self.mean:.5f} [{self.lower:.5f}, {self.upper:.5f}] "
            f"@ {self.level:.0%}"
        )


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss: float
    val_acc: float
    ci: ConfidenceInterval = None
    accuracies: List[float] = field(default=None, repr=False)

    def to_csv(self) -> str:
        line = f"{self.epoch},{self.lr!r},{self.loss!r},{self.val_acc!r}"
        if self.ci is not None:
            line += f",{self.ci.lower!r},{self.ci.mean!r},{self.ci.upper!r}"
        return line


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    stop_epoch: int = None
    stop_reason: str = None

    def append(self, record: EpochRecord):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ContractError("History epochs must increase.")
        self.records.append(record)

    @property
    def n_epochs(self) -> int:
        return len(self.records)

    @property
    def evaluations(self) -> List[EpochRecord]:
        return [record for record in self.records if record.ci is not None]

    @property
    def losses(self) -> List[float]:
        return [record.loss for record in self.records]

    def to_csv(self, path: str or Path = None) -> str:
        """One line per epoch: epoch,lr,loss,val_acc[,ci_a,ci_mu,ci_b]

        If `path` is given, the lines are also written to it.
        """
        text = "".join(f"{record.to_csv()}\n" for record in self.records)
        if path is not None:
            Path(path).write_text(text)
        return text

###############################################################################


def confidence_interval(samples, z: float = DEFAULT_Z) -> ConfidenceInterval:
    """μ ± z·SE with SE the sample standard deviation over √n

    Raises
    ------
    ContractError
        If fewer than two samples are given.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        raise ContractError(
            f"A confidence interval needs at least 2 samples, "
            f"got {samples.size}"
        )
    mean = float(samples.mean())
    standard_error = sample_std(samples) / math.sqrt(samples.size)
    return ConfidenceInterval(
        mean=mean,
        standard_error=standard_error,
        lower=mean - z * standard_error,
        upper=mean + z * standard_error,
        level=float(2.0 * norm.cdf(z) - 1.0),
    )


def pseudo_label(
    mean_probs: np.ndarray,
    unlabeled,
    threshold: float = DEFAULT_PSEUDO_THRESHOLD
) -> Dict[int, int]:
    """Confident predictions for unlabeled nodes

    Parameters
    ----------
    mean_probs : np.ndarray
        n x C class probabilities (column c is class c + 1)
    unlabeled : array-like
        Candidate nodes
    threshold : float, optional
        Minimum probability of the predicted class, in (0.5, 1].
        The default is `DEFAULT_PSEUDO_THRESHOLD`.

    Returns
    -------
    dict
        Node id → class id for every node whose highest probability reaches
        the threshold
    """
    if not 0.5 < threshold <= 1:
        raise ContractError(
            f"Pseudo-label threshold must lie in (0.5, 1], got {threshold}"
        )
    mean_probs = np.asarray(mean_probs, dtype=np.float64)
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    confidence = mean_probs[unlabeled].max(axis=1)
    predicted = mean_probs[unlabeled].argmax(axis=1) + 1
    selected = confidence >= threshold
    return {
        int(node): int(label)
        for node, label in zip(unlabeled[selected], predicted[selected])
    }


def gate_accuracy(
    predicted: np.ndarray,
    labels: np.ndarray,
    index: np.ndarray,
    stop_class: int = 0
) -> float:
    """Accuracy on `index`, optionally restricted to one class"""
    index = np.asarray(index, dtype=np.int64)
    if stop_class:
        index = index[labels[index] == stop_class]
    if index.size == 0:
        return 0.0
    return float(np.mean(predicted[index] == labels[index]))

###############################################################################


def model_state(model: BlgcnModel) -> Dict[str, np.ndarray]:
    tensors = model.named_tensors()
    return {name: value.copy() for name, value in tensors.items()}


def restore_state(model: BlgcnModel, state: Dict[str, np.ndarray]):
    for param in model.parameters():
        param.value = state[param.name].copy()


def _step(model, features, targets, index, config, rng) -> float:
    losses = [
        model.loss(
            model.forward(features, rng, train=True),
            targets, index, config.kl_scale
        )
        for _ in range(config.train_samples)
    ]
    loss = losses[0]
    for extra in losses[1:]:
        loss = ng.add(loss, extra)
    loss = ng.scale(loss, 1.0 / config.train_samples)
    ng.backward(loss)
    return loss.item()


def _refresh_pseudo_labels(model, graph, split, config, epoch):
    """Training targets and nodes with this epoch's pseudo-labels"""
    refresh = model.predict_mc(
        graph.features, config.pseudo_samples, config.seed,
        stream=(STREAM_PSEUDO, epoch)
    )
    assigned = pseudo_label(
        refresh.mean_probs, split.unlabeled, config.pseudo_threshold
    )
    targets = graph.labels.copy()
    nodes = np.fromiter(assigned, dtype=np.int64, count=len(assigned))
    targets[nodes] = [assigned[node] for node in nodes]
    LOGGER.info(f"Epoch {epoch}: {len(assigned)} pseudo-labels.")
    return targets, np.union1d(split.labeled, nodes)


def train(
    model: BlgcnModel,
    graph: SuperpixelGraph,
    split: SplitAssignment,
    config: TrainConfig = None,
    history: TrainHistory = None
) -> Tuple[BlgcnModel, TrainHistory]:
    """Train a model on a graph with the dynamic control strategy

    Parameters
    ----------
    model : BlgcnModel
        Model to train, attached to `graph` by this function
    graph : SuperpixelGraph
        Graph whose node labels are the ground truth
    split : SplitAssignment
        Labeled nodes train the model, unlabeled nodes validate it
    config : TrainConfig, optional
        Training parameters. If None, `TrainConfig()`.
        The default is None.
    history : TrainHistory, optional
        History to append to. If None, a new one is created.
        The default is None.

    Returns
    -------
    tuple
        The trained model and its history

    Raises
    ------
    NumericalError
        If the loss or a parameter becomes non-finite. The model is restored
        to the state after the last successful epoch and the history records
        the failure.
    """
    config = config or TrainConfig()
    history = history if history is not None else TrainHistory()
    if split.n_nodes != graph.n_nodes:
        raise ContractError(
            f"Split covers {split.n_nodes} nodes, graph has {graph.n_nodes}"
        )

    model.attach(graph.adjacency)
    features = graph.features
    labels = graph.labels
    targets = labels.copy()
    train_index = split.labeled
    schedule = config.schedule
    optimizer = ng.Adam(
        model.parameters(),
        weight_decay=config.weight_decay,
        decay_mask=model.decay_mask()
    )
    rng = make_rng(config.seed, STREAM_TRAIN)
    last_good = model_state(model)

    LOGGER.info(
        f"Training {model} on {split} for at most {config.max_epochs} epochs."
    )
    for epoch in range(config.max_epochs):
        lr = schedule.lr_at(epoch)
        try:
            loss = _step(model, features, targets, train_index, config, rng)
            optimizer.step(lr)
            if (
                epoch >= config.pseudo_start
                and (epoch - config.pseudo_start) % config.pseudo_every == 0
            ):
                targets, train_index = _refresh_pseudo_labels(
                    model, graph, split, config, epoch
                )
            single = model.forward(
                features, make_rng(config.seed, STREAM_VALIDATE, epoch)
            )
        except NumericalError as error:
            restore_state(model, last_good)
            history.stop_epoch = epoch
            history.stop_reason = STOP_NUMERIC
            LOGGER.error(
                f"Non-finite value at epoch {epoch} (lr={lr}): {error}. "
                "Restored the weights of the last finite epoch."
            )
            raise NumericalError(
                f"Training diverged at epoch {epoch}: {error}"
            ) from None
        last_good = model_state(model)

        predicted = single.values.argmax(axis=1) + 1
        val_acc = gate_accuracy(
            predicted, labels, split.unlabeled, config.stop_class
        )
        record = EpochRecord(epoch=epoch, lr=lr, loss=loss, val_acc=val_acc)
        history.append(record)
        LOGGER.debug(
            f"Epoch {epoch}: lr={lr:g}, loss={loss:.6f}, val_acc={val_acc:.4f}"
        )

        if not config.dynamic or val_acc < config.t1:
            continue

        index = split.unlabeled
        if config.stop_class:
            index = index[labels[index] == config.stop_class]
        frozen = model.predict_mc(
            features, config.eval_samples, config.seed,
            labels=labels, index=index, stream=(STREAM_EVALUATE, epoch)
        )
        record.accuracies = frozen.accuracies
        record.ci = confidence_interval(frozen.accuracies, config.z)
        reached = record.ci.upper >= config.t2
        LOGGER.info(
            f"Epoch {epoch}: val_acc {val_acc:.4f} >= T1 {config.t1}; "
            f"CI {record.ci}, upper bound "
            f"{'>=' if reached else '<'} T2 {config.t2}."
        )
        if reached:
            history.stop_epoch = epoch
            history.stop_reason = STOP_DYNAMIC
            break
    else:
        history.stop_epoch = config.max_epochs - 1
        history.stop_reason = STOP_BUDGET

    LOGGER.info(
        f"Training stopped at epoch {history.stop_epoch} "
        f"({history.stop_reason})."
    )
    return model, history

###############################################################################


@dataclass(eq=False)
class Evaluation:
    """Monte-Carlo evaluation on the unlabeled nodes"""
    predictions: np.ndarray = field(repr=False)
    mean_probs: np.ndarray = field(repr=False)
    accuracies: List[float] = field(default_factory=list)
    ci: ConfidenceInterval = None


def evaluate(
    model: BlgcnModel,
    graph: SuperpixelGraph,
    split: SplitAssignment,
    n_samples: int = DEFAULT_EVAL_SAMPLES,
    seed: int = DEFAULT_SEED,
    z: float = DEFAULT_Z
) -> Evaluation:
    """Predict every node from `n_samples` weight draws

    Predictions are the argmax of the mean probabilities; the per-draw
    accuracies are measured on the unlabeled nodes. A confidence interval is
    reported when at least two draws are made.
    """
    model.attach(graph.adjacency)
    result = model.predict_mc(
        graph.features, n_samples, seed,
        labels=graph.labels, index=split.unlabeled, stream=(STREAM_EVALUATE,)
    )
    ci = None
    if n_samples >= 2:
        ci = confidence_interval(result.accuracies, z)
        LOGGER.info(f"Evaluation over {n_samples} draws: {ci}")
    return Evaluation(
        predictions=result.predictions,
        mean_probs=result.mean_probs,
        accuracies=result.accuracies,
        ci=ci,
    )

###############################################################################
