#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
GAN Augmentation of Minority Classes

A class is a minority when its superpixel count is strictly below
`minority_threshold` times the largest class. For every minority class a
linear generator G(M) = W_G · M, initialised around the all-ones matrix, is
trained against a small discriminator. The generator input is the diagonal
matrix built from the class feature rows tiled to d rows (the "enhanced"
matrix). Each row of W_G · enhance(F_i) is one new feature vector; the graph
is then grown until the class reaches `fill_threshold` times the largest
class, every new node copying the neighbourhood of an existing node.
"""

###############################################################################

import math
import logging
from decimal import Decimal
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Tuple

import numpy as np
from scipy.special import expit

from . import numgrad as ng
from .numgrad import GradNode
from .hsi_io import SplitAssignment
from .superpixel import SuperpixelGraph, spectral_feature
from .errors import ConfigError, ContractError, NumericalError
from .utils import make_rng, validate_row_order
from .constants import (
    DEFAULT_GENERATOR_STD,
    DEFAULT_DISCRIMINATOR_STD,
    DEFAULT_GAN_LR,
    DEFAULT_GAN_EPOCHS,
    DEFAULT_DISCRIMINATOR_HIDDEN,
    MINORITY_THRESHOLD,
    FILL_THRESHOLD,
    ROW_ORDER_CYCLIC,
    ROW_ORDER_PERMUTED,
    DEFAULT_SEED,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

###############################################################################


@dataclass
class GanConfig:
    generator_std: float = DEFAULT_GENERATOR_STD
    discriminator_std: float = DEFAULT_DISCRIMINATOR_STD
    lr: float = DEFAULT_GAN_LR
    epochs: int = DEFAULT_GAN_EPOCHS
    hidden: int = DEFAULT_DISCRIMINATOR_HIDDEN
    minority_threshold: float = MINORITY_THRESHOLD
    fill_threshold: float = FILL_THRESHOLD
    row_order: str = ROW_ORDER_CYCLIC
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.generator_std <= 0 or self.discriminator_std <= 0:
            raise ConfigError("GAN initialisation stds must be positive.")
        if not 0 < self.minority_threshold <= self.fill_threshold < 1:
            raise ConfigError(
                "GAN thresholds must satisfy "
                "0 < minority_threshold <= fill_threshold < 1, got "
                f"{self.minority_threshold} and {self.fill_threshold}"
            )
        if self.epochs < 0 or self.hidden < 1:
            raise ConfigError("GAN epochs must be >= 0 and hidden >= 1.")
        row_order = validate_row_order(self.row_order)
        if row_order is None:
            raise ConfigError(f"Invalid replication order '{self.row_order}'")
        self.row_order = row_order


@dataclass(eq=False)
class Generator:
    """Linear map W_G applied from the left"""
    weight: GradNode = field(repr=False)

    @classmethod
    def create(cls, n_features: int, std: float,
               rng: np.random.Generator) -> "Generator":
        noise = rng.normal(0.0, std, size=(n_features, n_features))
        noise -= noise.mean()
        return cls(weight=ng.parameter(1.0 + noise, name="generator.weight"))

    def __call__(self, enhanced) -> GradNode:
        return ng.matmul(self.weight, enhanced)

    def parameters(self) -> List[GradNode]:
        return [self.weight]


@dataclass(eq=False)
class Discriminator:
    """d → hidden → 1 logit, ReLU in between"""
    w1: GradNode = field(repr=False)
    b1: GradNode = field(repr=False)
    w2: GradNode = field(repr=False)
    b2: GradNode = field(repr=False)

    @classmethod
    def create(cls, n_features: int, hidden: int, std: float,
               rng: np.random.Generator) -> "Discriminator":
        return cls(
            w1=ng.parameter(rng.normal(0.0, std, (n_features, hidden)),
                            name="discriminator.w1"),
            b1=ng.parameter(np.zeros((1, hidden)), name="discriminator.b1"),
            w2=ng.parameter(rng.normal(0.0, std, (hidden, 1)),
                            name="discriminator.w2"),
            b2=ng.parameter(np.zeros((1, 1)), name="discriminator.b2"),
        )

    def logits(self, rows) -> GradNode:
        hidden = ng.relu(ng.add_row(ng.matmul(rows, self.w1), self.b1))
        return ng.add_row(ng.matmul(hidden, self.w2), self.b2)

    def probability(self, rows) -> np.ndarray:
        """Probability that each row is real, in (0, 1)"""
        return expit(self.logits(rows).value)

    def parameters(self) -> List[GradNode]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass(eq=False)
class GanResult:
    generator: Generator
    discriminator: Discriminator
    history: List[Tuple[float, float]] = field(default_factory=list)

###############################################################################
# Minority detection


def _scaled(fraction: float, count: int) -> Decimal:
    return Decimal(repr(float(fraction))) * count


def detect_minority(
    counts: Mapping[int, int] or SuperpixelGraph,
    threshold: float = MINORITY_THRESHOLD
) -> List[int]:
    """Classes whose node count is strictly below `threshold` x the largest

    Parameters
    ----------
    counts : dict or SuperpixelGraph
        Node count per class id, or a graph to count from. Classes with no
        node are not reported.
    threshold : float, optional
        Minority fraction α_min.
        The default is `MINORITY_THRESHOLD`.

    Returns
    -------
    list
        Sorted minority class ids
    """
    if isinstance(counts, SuperpixelGraph):
        counts = class_count_map(counts)
    counts = {c: n for c, n in counts.items() if n > 0}
    if not counts:
        return []
    limit = _scaled(threshold, max(counts.values()))
    return sorted(c for c, n in counts.items() if n < limit)


def class_count_map(graph: SuperpixelGraph) -> Dict[int, int]:
    return {
        class_id: int(count)
        for class_id, count in enumerate(graph.class_counts(), start=1)
    }


def fill_target(largest: int, fill_threshold: float = FILL_THRESHOLD) -> int:
    """⌈fill_threshold · largest⌉"""
    return math.ceil(_scaled(fill_threshold, largest))

###############################################################################
# Enhanced input


def order_rng(seed: int) -> np.random.Generator:
    """Generator of the permuted replication order for a GAN seed"""
    return make_rng(seed, 0)


def tile_rows(
    class_rows,
    n_rows: int = None,
    row_order: str = ROW_ORDER_CYCLIC,
    rng: np.random.Generator = None
) -> np.ndarray:
    """Replicate the b class rows to `n_rows` rows (default d)

    Cyclic order takes row k from sample k mod b. Permuted order cycles
    through a seeded permutation of the samples instead.
    """
    class_rows = np.asarray(class_rows, dtype=np.float64)
    if class_rows.ndim != 2 or class_rows.size == 0:
        raise ContractError("Cannot tile an empty feature matrix.")
    n_samples, n_features = class_rows.shape
    n_rows = n_features if n_rows is None else n_rows

    order = np.arange(n_samples)
    if row_order == ROW_ORDER_PERMUTED:
        if rng is None:
            raise ContractError("Permuted replication needs a generator.")
        order = rng.permutation(n_samples)
    elif row_order != ROW_ORDER_CYCLIC:
        raise ContractError(f"Unknown replication order '{row_order}'")
    return class_rows[order[np.arange(n_rows) % n_samples]]


def enhance(
    class_rows,
    row_order: str = ROW_ORDER_CYCLIC,
    rng: np.random.Generator = None
) -> np.ndarray:
    """d x d diagonal matrix F′ ⊙ I_d of the tiled class rows

    Diagonal entry k is `class_rows[k mod b][k]` in cyclic order.
    """
    tiled = tile_rows(class_rows, row_order=row_order, rng=rng)
    return np.diag(np.diag(tiled))

###############################################################################
# Adversarial training


def bce_with_logits(logits: GradNode, target: float) -> GradNode:
    """Mean binary cross-entropy of sigmoid(logits) against a 0/1 target"""
    n_rows = logits.value.size
    if target == 1:
        terms = ng.softplus(ng.scale(logits, -1.0))
    elif target == 0:
        terms = ng.softplus(logits)
    else:
        raise ContractError(f"BCE target must be 0 or 1, got {target}")
    return ng.scale(ng.total(terms), 1.0 / n_rows)


def discriminator_loss(
    discriminator: Discriminator,
    real_rows,
    fake_rows
) -> GradNode:
    """BCE(D(real), 1) + BCE(D(fake), 0)"""
    return ng.add(
        bce_with_logits(discriminator.logits(ng.constant(real_rows)), 1),
        bce_with_logits(discriminator.logits(ng.constant(fake_rows)), 0),
    )


def generator_loss(
    discriminator: Discriminator,
    generator: Generator,
    enhanced
) -> GradNode:
    """BCE(D(G(enhanced)), 1)"""
    fake = generator(ng.constant(enhanced))
    return bce_with_logits(discriminator.logits(fake), 1)


def gan_train(class_rows, config: GanConfig = None) -> GanResult:
    """Alternate discriminator and generator steps

    Parameters
    ----------
    class_rows : array-like
        b x d real feature rows F_i of one class
    config : GanConfig, optional
        Training parameters. If None, `GanConfig()`.
        The default is None.

    Returns
    -------
    GanResult
        Trained networks and the (D_loss, G_loss) of every epoch

    Raises
    ------
    NumericalError
        If a loss becomes non-finite.
    """
    config = config or GanConfig()
    class_rows = np.asarray(class_rows, dtype=np.float64)
    if class_rows.ndim != 2 or class_rows.size == 0:
        raise ContractError("GAN training needs at least one feature row.")
    n_features = class_rows.shape[1]

    rng = make_rng(config.seed)
    generator = Generator.create(n_features, config.generator_std, rng)
    discriminator = Discriminator.create(
        n_features, config.hidden, config.discriminator_std, rng
    )
    enhanced = enhance(class_rows, config.row_order, order_rng(config.seed))
    d_optimizer = ng.Adam(discriminator.parameters())
    g_optimizer = ng.Adam(generator.parameters())

    result = GanResult(generator=generator, discriminator=discriminator)
    for epoch in range(config.epochs):
        try:
            fake_rows = generator.weight.value @ enhanced
            d_loss = discriminator_loss(discriminator, class_rows, fake_rows)
            ng.backward(d_loss)
            d_optimizer.step(config.lr)

            g_loss = generator_loss(discriminator, generator, enhanced)
            ng.backward(g_loss)
            g_optimizer.step(config.lr)
        except NumericalError as error:
            LOGGER.error(f"GAN diverged at epoch {epoch}: {error}")
            raise NumericalError(
                f"GAN training diverged at epoch {epoch} ({error})"
            ) from None

        result.history.append((d_loss.item(), g_loss.item()))
        if epoch % 500 == 0:
            LOGGER.debug(
                f"GAN epoch {epoch}: D_loss={d_loss.item():.6f}, "
                f"G_loss={g_loss.item():.6f}"
            )
    return result


def generate(
    generator: Generator,
    class_rows,
    count: int,
    row_order: str = ROW_ORDER_CYCLIC,
    rng: np.random.Generator = None
) -> np.ndarray:
    """`count` new rows of W_G · enhance(F_i), cycling through its d rows

    Row r of the product has entries W_G[r][c] · F_i[c mod b][c], a sample
    interleaved feature by feature from the originals.
    """
    if count < 1:
        raise ContractError(f"Need at least one generated row, got {count}")
    product = generator.weight.value @ enhance(class_rows, row_order, rng)
    rows = product[np.arange(count) % product.shape[0]]
    if not np.all(np.isfinite(rows)):
        raise NumericalError("Generator produced non-finite rows.")
    return rows

###############################################################################
# Graph expansion


def expand_graph(
    graph: SuperpixelGraph,
    class_id: int,
    new_rows,
    rng: np.random.Generator,
    match_pool=None
) -> Tuple[SuperpixelGraph, np.ndarray]:
    """Append generated nodes of one class

    Each new node takes the label `class_id`, the generated t-part with
    s = Σ t², and the adjacency of a node drawn uniformly from
    `match_pool` (default all nodes of the class).

    Returns
    -------
    tuple
        The expanded graph and the ids of the appended nodes
    """
    new_rows = np.asarray(new_rows, dtype=np.float64)
    if new_rows.ndim != 2 or new_rows.shape[1] not in (
        graph.n_bands, graph.n_features
    ):
        raise ContractError(
            f"Generated rows of shape {new_rows.shape} do not fit "
            f"{graph.n_bands} bands"
        )
    texture = new_rows[:, :graph.n_bands]

    if match_pool is None:
        match_pool = np.flatnonzero(graph.labels == class_id)
    match_pool = np.asarray(match_pool, dtype=np.int64)
    if match_pool.size == 0:
        raise ContractError(
            f"Class {class_id} has no node to match generated nodes with."
        )

    n_old, n_new = graph.n_nodes, texture.shape[0]
    matches = match_pool[rng.integers(0, match_pool.size, size=n_new)]

    adjacency = np.zeros((n_old + n_new, n_old + n_new))
    adjacency[:n_old, :n_old] = graph.adjacency
    adjacency[n_old:, :n_old] = graph.adjacency[matches]
    adjacency[:n_old, n_old:] = graph.adjacency[matches].T

    features = np.vstack([
        graph.features,
        np.column_stack([texture, spectral_feature(texture)])
    ])
    expanded = replace(
        graph,
        features=features,
        adjacency=adjacency,
        labels=np.concatenate([graph.labels, np.full(n_new, class_id)]),
        members=list(graph.members)
        + [np.zeros(0, dtype=np.int64)] * n_new,
        segment_ids=np.concatenate(
            [graph.segment_ids, np.full(n_new, -1, dtype=np.int64)]
        ),
    )
    return expanded, np.arange(n_old, n_old + n_new)


@dataclass(eq=False)
class Augmentation:
    """Outcome of `augment_graph`"""
    graph: SuperpixelGraph
    split: SplitAssignment
    added: Dict[int, int] = field(default_factory=dict)
    histories: Dict[int, List[Tuple[float, float]]] = field(
        default_factory=dict, repr=False
    )


def augment_graph(
    graph: SuperpixelGraph,
    split: SplitAssignment,
    config: GanConfig = None
) -> Augmentation:
    """Detect minority classes and grow each one to the fill target

    The GAN of a class is trained on its labeled nodes only, and generated
    nodes are matched against labeled nodes of the class. Appended nodes join
    the labeled set.
    """
    config = config or GanConfig()
    counts = class_count_map(graph)
    minority = detect_minority(counts, config.minority_threshold)
    augmentation = Augmentation(graph=graph, split=split)
    if not minority:
        LOGGER.info("No minority class, augmentation skipped.")
        return augmentation

    target = fill_target(max(counts.values()), config.fill_threshold)
    for class_id in minority:
        needed = target - counts[class_id]
        labeled = augmentation.split.labeled
        pool = labeled[augmentation.graph.labels[labeled] == class_id]
        if needed <= 0:
            continue
        if pool.size == 0:
            LOGGER.warning(
                f"Minority class {class_id} has no labeled node, skipped."
            )
            continue

        LOGGER.info(
            f"Augmenting class {class_id}: {counts[class_id]} nodes, "
            f"{needed} to generate (target {target})."
        )
        class_config = replace(config, seed=config.seed + class_id)
        rng = make_rng(config.seed, class_id)
        real_rows = augmentation.graph.features[pool, :graph.n_bands]
        gan = gan_train(real_rows, class_config)
        rows = generate(gan.generator, real_rows, needed, config.row_order,
                        order_rng(class_config.seed))
        expanded, new_nodes = expand_graph(
            augmentation.graph, class_id, rows, rng, match_pool=pool
        )
        augmentation.graph = expanded
        augmentation.split = augmentation.split.with_labeled(new_nodes)
        augmentation.added[class_id] = int(new_nodes.size)
        augmentation.histories[class_id] = gan.history
    return augmentation

###############################################################################
