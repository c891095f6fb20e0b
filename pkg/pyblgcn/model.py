#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Bayesian Graph Convolutional Network

Feature extraction (two dense layers with ReLU, then dropout) followed by two
Bayesian graph convolutions mixing node features through the renormalised
adjacency Â_G:

    H₀ = dropout(ReLU(fc2(ReLU(fc1(F)))))
    H₁ = ReLU(Â_G · H₀ · W₁ + b₁),      W₁, b₁ ~ q₁
    out = log_softmax(Â_G · H₁ · W₂ + b₂),  W₂, b₂ ~ q₂

Output column c holds the log-probability of class c + 1.

Checkpoint format (little-endian)::

    "BLGC" | u32 header length | UTF-8 "key=value" header lines
    per tensor: u16 name length | name | u32 rows | u32 cols | float64 data
"""

###############################################################################

import struct
import logging
from pathlib import Path
from dataclasses import dataclass, field, asdict, fields
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import numgrad as ng
from .numgrad import GradNode
from .bayes_layer import (
    BayesianLinear, WeightSample,
    sample, apply, log_q, log_p, bayes_loss, glorot_limit, layer_kl
)
from .superpixel import renormalize
from .errors import ConfigError, ContractError, DataFormatError
from .utils import make_rng
from .constants import (
    CHECKPOINT_MAGIC,
    DEFAULT_HIDDEN, DEFAULT_HIDDEN2, DEFAULT_DROPOUT,
    DEFAULT_PRIOR_MEAN, DEFAULT_PRIOR_STD, DEFAULT_RHO_INIT,
    DEFAULT_KL_SCALE, DEFAULT_SEED,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

###############################################################################


@dataclass
class ModelConfig:
    """Architecture and prior of the network

    `identity_graph` replaces Â_G by the identity, turning both graph
    convolutions into per-node Bayesian dense layers.
    """
    hidden: int = DEFAULT_HIDDEN
    hidden2: int = DEFAULT_HIDDEN2
    dropout: float = DEFAULT_DROPOUT
    prior_mean: float = DEFAULT_PRIOR_MEAN
    prior_std: float = DEFAULT_PRIOR_STD
    rho_init: float = DEFAULT_RHO_INIT
    kl_scale: float = DEFAULT_KL_SCALE
    identity_graph: bool = False
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.hidden < 1 or self.hidden2 < 1:
            raise ConfigError("Hidden widths must be positive.")
        if not 0 <= self.dropout < 1:
            raise ConfigError(
                f"Dropout must lie in [0, 1), got {self.dropout}"
            )
        if self.prior_std <= 0:
            raise ConfigError("Prior standard deviation must be positive.")
        if self.kl_scale < 0:
            raise ConfigError(f"KL scale must be >= 0, got {self.kl_scale}")


@dataclass(eq=False)
class DenseLayer:
    """Deterministic H·W + b"""
    weight: GradNode = field(repr=False)
    bias: GradNode = field(repr=False)
    name: str = "dense"

    @classmethod
    def create(cls, n_in: int, n_out: int, rng: np.random.Generator,
               name: str = "dense") -> "DenseLayer":
        limit = glorot_limit(n_in, n_out)
        return cls(
            weight=ng.parameter(rng.uniform(-limit, limit, (n_in, n_out)),
                                name=f"{name}.weight"),
            bias=ng.parameter(np.zeros((1, n_out)), name=f"{name}.bias"),
            name=name,
        )

    def __call__(self, layer_input) -> GradNode:
        return ng.add_row(ng.matmul(layer_input, self.weight), self.bias)

    def parameters(self) -> List[GradNode]:
        return [self.weight, self.bias]


@dataclass(eq=False)
class ForwardPass:
    """Output of one stochastic forward pass"""
    log_probs: GradNode = field(repr=False)
    samples: Tuple[WeightSample, WeightSample] = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.log_probs.value


@dataclass(eq=False)
class McPrediction:
    """Monte-Carlo predictive of `predict_mc`"""
    mean_probs: np.ndarray = field(repr=False)
    accuracies: List[float] = field(default_factory=list)

    @property
    def predictions(self) -> np.ndarray:
        """Class ids 1..C of the most probable class per node"""
        return self.mean_probs.argmax(axis=1) + 1

    @property
    def confidence(self) -> np.ndarray:
        return self.mean_probs.max(axis=1)

###############################################################################


class BlgcnModel:
    """Feature extraction block followed by two Bayesian graph convolutions

    Parameters
    ----------
    n_features : int
        Width d + 1 of the node features
    n_classes : int
        Number of classes C
    config : ModelConfig, optional
        Architecture. If None, `ModelConfig()`.
        The default is None.
    rng : numpy.random.Generator, optional
        Initialisation generator. If None, seeded from `config.seed`.
        The default is None.
    """

    def __init__(
        self,
        n_features: int,
        n_classes: int,
        config: ModelConfig = None,
        rng: np.random.Generator = None
    ):
        if n_features < 1 or n_classes < 1:
            raise ContractError("Model needs at least one feature and class.")
        self.config = config or ModelConfig()
        self.n_features = n_features
        self.n_classes = n_classes
        rng = rng if rng is not None else make_rng(self.config.seed)

        cfg = self.config
        self.fc1 = DenseLayer.create(n_features, cfg.hidden, rng, "fc1")
        self.fc2 = DenseLayer.create(cfg.hidden, cfg.hidden, rng, "fc2")
        self.bgc1 = BayesianLinear.create(
            cfg.hidden, cfg.hidden2, rng, rho_init=cfg.rho_init,
            prior_mean=cfg.prior_mean, prior_std=cfg.prior_std, name="bgc1"
        )
        self.bgc2 = BayesianLinear.create(
            cfg.hidden2, n_classes, rng, rho_init=cfg.rho_init,
            prior_mean=cfg.prior_mean, prior_std=cfg.prior_std, name="bgc2"
        )
        self.propagation = None

    # ----------------------------------------------------------------------- #

    def attach(self, adjacency: np.ndarray):
        """Cache Â_G for a graph with binary adjacency A"""
        adjacency = np.asarray(adjacency, dtype=np.float64)
        n_nodes = adjacency.shape[0]
        if self.config.identity_graph:
            self.propagation = np.eye(n_nodes)
        else:
            self.propagation = renormalize(adjacency)
        LOGGER.debug(f"Attached graph with {n_nodes} nodes.")

    @property
    def n_nodes(self) -> int:
        return None if self.propagation is None else self.propagation.shape[0]

    def layers(self) -> list:
        return [self.fc1, self.fc2, self.bgc1, self.bgc2]

    def parameters(self) -> List[GradNode]:
        return [p for layer in self.layers() for p in layer.parameters()]

    def named_tensors(self) -> Dict[str, np.ndarray]:
        return {p.name: p.value for p in self.parameters()}

    def decay_mask(self) -> List[bool]:
        """Weight decay applies to every parameter except the ρ tensors"""
        rhos = {id(layer.rho_w) for layer in (self.bgc1, self.bgc2)}
        rhos |= {id(layer.rho_b) for layer in (self.bgc1, self.bgc2)}
        return [id(p) not in rhos for p in self.parameters()]

    def kl(self) -> float:
        return layer_kl(self.bgc1) + layer_kl(self.bgc2)

    def __repr__(self) -> str:
        cfg = self.config
        return (
            f"BlgcnModel({self.n_features}→{cfg.hidden}→{cfg.hidden}"
            f"→{cfg.hidden2}→{self.n_classes}, dropout={cfg.dropout})"
        )

    # ----------------------------------------------------------------------- #

    def _propagate(self, hidden: GradNode) -> GradNode:
        if self.config.identity_graph:
            return hidden
        return ng.matmul(ng.constant(self.propagation), hidden)

    def forward(
        self,
        features,
        rng: np.random.Generator = None,
        train: bool = False,
        epsilons: Sequence[Tuple[np.ndarray, np.ndarray]] = None,
        dropout_mask: np.ndarray = None
    ) -> ForwardPass:
        """One stochastic forward pass

        Parameters
        ----------
        features : array-like
            n x (d+1) feature matrix F
        rng : numpy.random.Generator, optional
            Source of the dropout mask and the weight noise.
            The default is None.
        train : bool, optional
            If True, apply dropout. Evaluation mode leaves H₀ untouched.
            The default is False.
        epsilons : list, optional
            Fixed (ε_W, ε_b) of bgc1 and bgc2.
            The default is None.
        dropout_mask : np.ndarray, optional
            Fixed keep-mask (0/1) replacing the random one in train mode.
            The default is None.

        Returns
        -------
        ForwardPass
            n x C log-probabilities and the weight samples
        """
        features = ng.as_matrix(features)
        if self.propagation is None:
            raise ContractError("No graph attached to the model.")
        if features.shape != (self.n_nodes, self.n_features):
            raise ContractError(
                f"Features of shape {features.shape} do not match the "
                f"attached graph ({self.n_nodes} x {self.n_features})"
            )

        hidden = ng.relu(self.fc1(features))
        hidden = ng.relu(self.fc2(hidden))
        rate = self.config.dropout
        if train and rate > 0:
            if dropout_mask is None:
                dropout_mask = rng.random(hidden.shape) >= rate
            keep = np.asarray(dropout_mask, dtype=np.float64) / (1.0 - rate)
            hidden = ng.hadamard(hidden, ng.constant(keep))

        epsilons = epsilons or (None, None)
        first = sample(self.bgc1, rng, epsilon=epsilons[0])
        second = sample(self.bgc2, rng, epsilon=epsilons[1])

        hidden = ng.relu(apply(self._propagate(hidden), first))
        logits = apply(self._propagate(hidden), second)
        return ForwardPass(
            log_probs=ng.log_softmax_rows(logits),
            samples=(first, second),
        )

    def predict_mc(
        self,
        features,
        n_samples: int,
        seed: int,
        labels: np.ndarray = None,
        index: np.ndarray = None,
        stream: Tuple[int, ...] = ()
    ) -> McPrediction:
        """Average the class probabilities of `n_samples` weight draws

        Draw `r` uses the generator stream `(seed, *stream, r)`, so the
        result does not depend on the order in which the draws are
        evaluated. When `labels` and `index` are given, the accuracy of every
        draw on the nodes of `index` is recorded.
        """
        if n_samples < 1:
            raise ContractError(f"Need at least one sample, got {n_samples}")
        record = labels is not None and index is not None
        if record:
            index = np.asarray(index, dtype=np.int64)
            truth = np.asarray(labels)[index]

        total = np.zeros((self.n_nodes, self.n_classes))
        accuracies = []
        for run in range(n_samples):
            rng = make_rng(seed, *stream, run)
            result = self.forward(features, rng, train=False)
            probs = np.exp(result.values)
            total += probs
            if record:
                predicted = probs[index].argmax(axis=1) + 1
                accuracies.append(
                    float(np.mean(predicted == truth)) if index.size else 0.0
                )
        return McPrediction(total / n_samples, accuracies)

    def loss(
        self,
        result: ForwardPass,
        labels: np.ndarray,
        index: np.ndarray,
        kl_scale: float = None
    ) -> GradNode:
        """Variational loss of a forward pass"""
        kl_scale = self.config.kl_scale if kl_scale is None else kl_scale
        sum_log_q = ng.add(
            log_q(self.bgc1, result.samples[0]),
            log_q(self.bgc2, result.samples[1]),
        )
        sum_log_p = ng.add(
            log_p(self.bgc1, result.samples[0]),
            log_p(self.bgc2, result.samples[1]),
        )
        return bayes_loss(
            sum_log_q, sum_log_p,
            nll(result.log_probs, labels, index),
            kl_scale
        )

###############################################################################


def nll(log_probs, labels, index) -> GradNode:
    """−Σ_{j ∈ index} log-prob[j][label_j] (a sum, not a mean)

    Parameters
    ----------
    log_probs : GradNode
        n x C log-probabilities; column c is class c + 1
    labels : array-like
        Class id 1..C of every node
    index : array-like
        Nodes contributing to the loss

    Raises
    ------
    ContractError
        If an index or a label is out of range.
    """
    log_probs = log_probs if isinstance(log_probs, GradNode) \
        else ng.constant(log_probs)
    n_nodes, n_classes = log_probs.shape
    index = np.unique(np.asarray(index, dtype=np.int64))
    labels = np.asarray(labels, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= n_nodes):
        raise ContractError(f"Node index out of range for {n_nodes} nodes.")
    columns = labels[index] - 1
    if columns.size and (columns.min() < 0 or columns.max() >= n_classes):
        raise ContractError(f"Labels must lie in 1..{n_classes}.")

    mask = np.zeros((n_nodes, n_classes))
    mask[index, columns] = 1.0
    return ng.scale(ng.total(ng.hadamard(log_probs, ng.constant(mask))), -1.0)

###############################################################################
# Checkpoints


def save_checkpoint(model: BlgcnModel, path: str or Path) -> Path:
    """Write every parameter of the model with its configuration"""
    path = Path(path)
    header = {
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        **asdict(model.config)
    }
    header_bytes = "\n".join(
        f"{key}={value}" for key, value in header.items()
    ).encode("utf-8")

    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(header_bytes)),
              header_bytes]
    for name, value in model.named_tensors().items():
        name_bytes = name.encode("utf-8")
        rows, cols = value.shape
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def _parse_header(text: str, path) -> Tuple[int, int, ModelConfig]:
    values = dict(
        line.split("=", 1) for line in text.splitlines() if "=" in line
    )
    converters = {f.name: f.type for f in fields(ModelConfig)}
    try:
        kwargs = {}
        for key, converter in converters.items():
            raw = values[key]
            if converter is bool:
                kwargs[key] = raw == "True"
            else:
                kwargs[key] = converter(raw)
        return (int(values["n_features"]), int(values["n_classes"]),
                ModelConfig(**kwargs))
    except (KeyError, ValueError) as error:
        raise DataFormatError(
            f"Invalid checkpoint header ({error})", path=path, offset=8
        ) from None


def load_checkpoint(path: str or Path) -> BlgcnModel:
    """Rebuild a model from `save_checkpoint` output, bit-exact"""
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError("Bad magic bytes, expected b'BLGC'",
                              path=path, offset=0)
    try:
        (header_length,) = struct.unpack_from("<I", data, 4)
        offset = 8 + header_length
        header = data[8:offset].decode("utf-8")
    except (struct.error, UnicodeDecodeError):
        raise DataFormatError("Truncated header", path=path, offset=4) \
            from None
    n_features, n_classes, config = _parse_header(header, path)
    model = BlgcnModel(n_features, n_classes, config)

    tensors = {}
    while offset < len(data):
        start = offset
        try:
            (name_length,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_length].decode("utf-8")
            offset += name_length
            rows, cols = struct.unpack_from("<II", data, offset)
            offset += 8
            size = rows * cols * 8
            if offset + size > len(data):
                raise struct.error
            tensors[name] = np.frombuffer(
                data, dtype="<f8", count=rows * cols, offset=offset
            ).reshape(rows, cols).astype(np.float64)
            offset += size
        except (struct.error, UnicodeDecodeError):
            raise DataFormatError("Truncated tensor", path=path,
                                  offset=start) from None

    for param in model.parameters():
        if param.name not in tensors:
            raise DataFormatError(f"Missing tensor '{param.name}'", path=path)
        if tensors[param.name].shape != param.shape:
            raise DataFormatError(
                f"Tensor '{param.name}' has shape "
                f"{tensors[param.name].shape}, expected {param.shape}",
                path=path
            )
        param.value = tensors[param.name]
    return model

###############################################################################
