#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Run Configuration

A single flat set of `key = value` settings covering every stage of a run.
Settings are read from a text file (`#` starts a comment) and overridden by
`key=value` strings from the command line.
"""

###############################################################################

import logging
from pathlib import Path
from dataclasses import dataclass, field, fields, asdict, replace
from typing import Dict, Iterable, Tuple

from .errors import ConfigError, ContractError
from .hsi_io import SynthSpec
from .superpixel import SlicConfig
from .gan_augment import GanConfig
from .model import ModelConfig
from .trainer import TrainConfig
from .constants import (
    DEFAULT_OUTPUT_DIR, DEFAULT_SEED, DEFAULT_SPLIT_RATIO,
    DEFAULT_N_SEGMENTS, DEFAULT_COMPACTNESS, DEFAULT_SLIC_ITERATIONS,
    DEFAULT_GENERATOR_STD, DEFAULT_DISCRIMINATOR_STD, DEFAULT_GAN_LR,
    DEFAULT_GAN_EPOCHS, DEFAULT_DISCRIMINATOR_HIDDEN,
    MINORITY_THRESHOLD, FILL_THRESHOLD, ROW_ORDER_CYCLIC,
    DEFAULT_HIDDEN, DEFAULT_HIDDEN2, DEFAULT_DROPOUT,
    DEFAULT_PRIOR_MEAN, DEFAULT_PRIOR_STD, DEFAULT_RHO_INIT, DEFAULT_KL_SCALE,
    DEFAULT_MAX_EPOCHS, DEFAULT_LR, DEFAULT_GAMMA, DEFAULT_MILESTONES,
    DEFAULT_WEIGHT_DECAY, DEFAULT_T1, DEFAULT_T2, DEFAULT_Z,
    DEFAULT_EVAL_SAMPLES, DEFAULT_TRAIN_SAMPLES,
    DEFAULT_PSEUDO_THRESHOLD, DEFAULT_PSEUDO_START, DEFAULT_PSEUDO_EVERY,
    DEFAULT_PSEUDO_SAMPLES,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}

###############################################################################


def _setting(default, help_text: str):
    return field(default=default, metadata={"help": help_text})


@dataclass
class RunConfig:
    # data
    cube: str = _setting("", "BLG1 cube file (empty: synthetic cube)")
    labels: str = _setting("", "BLGL label file")
    output_dir: str = _setting(str(DEFAULT_OUTPUT_DIR), "output directory")
    normalize: bool = _setting(True, "min-max scale every band")
    split_ratio: float = _setting(DEFAULT_SPLIT_RATIO,
                                  "labeled fraction of every class")
    seed: int = _setting(DEFAULT_SEED, "root seed of the run")
    # synthetic cube
    synth_classes: int = _setting(4, "synthetic classes")
    synth_bands: int = _setting(10, "synthetic bands")
    synth_blob: int = _setting(16, "side of a synthetic class square")
    synth_gap: int = _setting(6, "background pixels between squares")
    synth_noise: float = _setting(0.0, "synthetic Gaussian noise std")
    # superpixels
    n_segments: int = _setting(DEFAULT_N_SEGMENTS, "target superpixel count")
    compactness: float = _setting(DEFAULT_COMPACTNESS, "SLIC compactness")
    slic_iterations: int = _setting(DEFAULT_SLIC_ITERATIONS,
                                    "SLIC iterations")
    slic_jitter: float = _setting(0.0, "SLIC seed jitter in grid units")
    # augmentation
    augment: bool = _setting(True, "GAN augmentation of minority classes")
    gan_generator_std: float = _setting(DEFAULT_GENERATOR_STD,
                                        "generator init std")
    gan_discriminator_std: float = _setting(DEFAULT_DISCRIMINATOR_STD,
                                            "discriminator init std")
    gan_lr: float = _setting(DEFAULT_GAN_LR, "GAN learning rate")
    gan_epochs: int = _setting(DEFAULT_GAN_EPOCHS, "GAN epochs")
    gan_hidden: int = _setting(DEFAULT_DISCRIMINATOR_HIDDEN,
                               "discriminator hidden width")
    minority_threshold: float = _setting(MINORITY_THRESHOLD,
                                         "minority fraction of largest class")
    fill_threshold: float = _setting(FILL_THRESHOLD,
                                     "fill fraction of largest class")
    row_order: str = _setting(ROW_ORDER_CYCLIC,
                              "replication order (cyclic|permuted)")
    # model
    hidden: int = _setting(DEFAULT_HIDDEN, "feature extraction width")
    hidden2: int = _setting(DEFAULT_HIDDEN2, "first graph layer width")
    dropout: float = _setting(DEFAULT_DROPOUT, "dropout rate")
    prior_mean: float = _setting(DEFAULT_PRIOR_MEAN, "prior mean")
    prior_std: float = _setting(DEFAULT_PRIOR_STD, "prior std")
    rho_init: float = _setting(DEFAULT_RHO_INIT, "initial rho")
    kl_scale: float = _setting(DEFAULT_KL_SCALE, "KL scale kappa")
    identity_graph: bool = _setting(False, "replace the graph by I")
    # training
    max_epochs: int = _setting(DEFAULT_MAX_EPOCHS, "epoch budget")
    lr: float = _setting(DEFAULT_LR, "initial learning rate")
    gamma: float = _setting(DEFAULT_GAMMA, "learning rate decay")
    milestones: Tuple[int, ...] = _setting(DEFAULT_MILESTONES,
                                           "decay epochs (comma separated)")
    weight_decay: float = _setting(DEFAULT_WEIGHT_DECAY, "weight decay")
    t1: float = _setting(DEFAULT_T1, "validation accuracy gate")
    t2: float = _setting(DEFAULT_T2, "confidence bound gate")
    z: float = _setting(DEFAULT_Z, "standard score of the interval")
    dynamic: bool = _setting(True, "dynamic stopping")
    eval_samples: int = _setting(DEFAULT_EVAL_SAMPLES,
                                 "Monte-Carlo evaluation draws")
    train_samples: int = _setting(DEFAULT_TRAIN_SAMPLES,
                                  "weight draws per step")
    pseudo_threshold: float = _setting(DEFAULT_PSEUDO_THRESHOLD,
                                       "pseudo-label probability")
    pseudo_start: int = _setting(DEFAULT_PSEUDO_START,
                                 "first pseudo-label epoch")
    pseudo_every: int = _setting(DEFAULT_PSEUDO_EVERY,
                                 "pseudo-label refresh period")
    pseudo_samples: int = _setting(DEFAULT_PSEUDO_SAMPLES,
                                   "pseudo-label draws")
    stop_class: int = _setting(0, "class feeding the gates (0: all)")
    # reporting
    pixel_weighted: bool = _setting(False, "weight metrics by pixel count")
    trials: int = _setting(1, "independent trials")
    jobs: int = _setting(1, "parallel trial processes")

    def __post_init__(self):
        self.milestones = tuple(self.milestones)
        if self.trials < 1 or self.jobs < 1:
            raise ConfigError("trials and jobs must be at least 1.")

    # ----------------------------------------------------------------------- #

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)

    def slic(self) -> SlicConfig:
        return SlicConfig(
            n_segments=self.n_segments,
            compactness=self.compactness,
            iterations=self.slic_iterations,
            jitter=self.slic_jitter,
            seed=self.seed,
        )

    def gan(self) -> GanConfig:
        return GanConfig(
            generator_std=self.gan_generator_std,
            discriminator_std=self.gan_discriminator_std,
            lr=self.gan_lr,
            epochs=self.gan_epochs,
            hidden=self.gan_hidden,
            minority_threshold=self.minority_threshold,
            fill_threshold=self.fill_threshold,
            row_order=self.row_order,
            seed=self.seed,
        )

    def model(self) -> ModelConfig:
        return ModelConfig(
            hidden=self.hidden,
            hidden2=self.hidden2,
            dropout=self.dropout,
            prior_mean=self.prior_mean,
            prior_std=self.prior_std,
            rho_init=self.rho_init,
            kl_scale=self.kl_scale,
            identity_graph=self.identity_graph,
            seed=self.seed,
        )

    def train(self) -> TrainConfig:
        return TrainConfig(
            max_epochs=self.max_epochs,
            lr=self.lr,
            gamma=self.gamma,
            milestones=self.milestones,
            weight_decay=self.weight_decay,
            t1=self.t1,
            t2=self.t2,
            z=self.z,
            dynamic=self.dynamic,
            eval_samples=self.eval_samples,
            train_samples=self.train_samples,
            pseudo_threshold=self.pseudo_threshold,
            pseudo_start=self.pseudo_start,
            pseudo_every=self.pseudo_every,
            pseudo_samples=self.pseudo_samples,
            stop_class=self.stop_class,
            kl_scale=self.kl_scale,
            seed=self.seed,
        )

    def synth(self) -> SynthSpec:
        try:
            return SynthSpec(
                n_classes=self.synth_classes,
                bands=self.synth_bands,
                blob=self.synth_blob,
                gap=self.synth_gap,
                noise=self.synth_noise,
                seed=self.seed,
            )
        except ContractError as error:
            raise ConfigError(str(error)) from None

    def validate(self) -> "RunConfig":
        """Build every stage configuration once, raising `ConfigError`"""
        self.slic()
        self.gan()
        self.model()
        self.train()
        if not self.cube:
            self.synth()
        if not 0 < self.split_ratio < 1:
            raise ConfigError(
                f"split_ratio must lie in (0, 1), got {self.split_ratio}"
            )
        return self

    def dump(self) -> str:
        """`key = value` lines of every setting, in declaration order"""
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = ",".join(str(item) for item in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

###############################################################################


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, raw: str):
    """Coerce a raw string to the type of setting `key`"""
    if key not in FIELD_TYPES:
        raise ConfigError(f"Unknown setting '{key}'")
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind is bool:
            word = raw.lower()
            if word in TRUE_WORDS:
                return True
            if word in FALSE_WORDS:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        return tuple(
            int(item) for item in raw.replace(",", " ").split()
        )
    except ValueError:
        raise ConfigError(
            f"Invalid value '{raw}' for setting '{key}'"
        ) from None


def parse_assignment(text: str) -> Tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"Expected key=value, got '{text}'")
    key, raw = text.split("=", 1)
    return key.strip(), raw


def read_config_file(path: str or Path) -> Dict[str, object]:
    path = Path(path)
    values = {}
    for line_number, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, raw = parse_assignment(line)
            values[key] = parse_value(key, raw)
        except ConfigError as error:
            raise ConfigError(f"{path}:{line_number}: {error}") from None
    return values


def load_config(
    path: str or Path = None,
    overrides: Iterable[str] = ()
) -> RunConfig:
    """Settings from an optional file, then `key=value` overrides

    Raises
    ------
    ConfigError
        On unknown keys or invalid values.
    """
    values = read_config_file(path) if path else {}
    for override in overrides or ():
        key, raw = parse_assignment(override)
        values[key] = parse_value(key, raw)
    config = RunConfig(**values)
    LOGGER.debug(f"Loaded configuration with {len(values)} explicit values.")
    return config.validate()


def config_help() -> str:
    """Every setting with its default, for `--help`"""
    defaults = RunConfig()
    width = max(len(f.name) for f in fields(RunConfig))
    lines = ["settings (key=value):"]
    for f in fields(RunConfig):
        value = getattr(defaults, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(item) for item in value)
        lines.append(
            f"  {f.name:<{width}}  {f.metadata['help']} (default: {value!s})"
        )
    return "\n".join(lines)

###############################################################################
