#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
PyBLGCN

Superpixel graph classification of hyperspectral images with Bayesian graph
convolutions, GAN augmentation of minority classes and dynamic stopping.
"""

###############################################################################

__author__ = "PyBLGCN Developers"
__version__ = '0.1.0'

###############################################################################

from .config import RunConfig, load_config              # noqa
from .pipeline import Pipeline, run_trials              # noqa
from .model import BlgcnModel, ModelConfig              # noqa
from .trainer import TrainConfig, train, evaluate       # noqa
from .shell import BLGCNShell                           # noqa
from .constants import (                                # noqa
    GRAPH_FILE, SPLIT_FILE, HISTORY_FILE, REPORT_FILE, MAP_FILE,
    MANIFEST_FILE,
    EXIT_OK, EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_NUMERIC_ERROR,
)
