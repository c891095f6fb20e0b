#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
PyBLGCN Constants
"""

###############################################################################

from pathlib import Path

###############################################################################
# Binary Formats

CUBE_MAGIC = b"BLG1"
LABEL_MAGIC = b"BLGL"
CHECKPOINT_MAGIC = b"BLGC"

###############################################################################
# Output Files

GRAPH_FILE = "graph.txt"
SPLIT_FILE = "split.txt"
AUGMENTED_GRAPH_FILE = "graph_augmented.txt"
AUGMENTED_SPLIT_FILE = "split_augmented.txt"
GAN_HISTORY_FILE = "gan_history.csv"
SEGMENTATION_FILE = "segmentation.npy"
HISTORY_FILE = "history.csv"
REPORT_FILE = "report.txt"
MAP_FILE = "map.ppm"
MANIFEST_FILE = "manifest.txt"
CHECKPOINT_FILE = "model.ckpt"
TRIALS_DB_FILE = "trials.sqlite"
CUBE_FILE = "cube.blg"
LABELS_FILE = "labels.blgl"
TRIAL_DIR_FORMAT = "trial_{:03d}"

###############################################################################
# Exit Codes

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERIC_ERROR = 4

###############################################################################
# Superpixel Segmentation

DEFAULT_N_SEGMENTS = 100
DEFAULT_COMPACTNESS = 0.08
DEFAULT_SLIC_ITERATIONS = 10

###############################################################################
# Data Augmentation

DEFAULT_GENERATOR_STD = 1e-5
DEFAULT_DISCRIMINATOR_STD = 0.01
DEFAULT_GAN_LR = 1e-7
DEFAULT_GAN_EPOCHS = 2000
DEFAULT_DISCRIMINATOR_HIDDEN = 32
MINORITY_THRESHOLD = 0.02
FILL_THRESHOLD = 0.05

ROW_ORDER_CYCLIC = "cyclic"
ROW_ORDER_PERMUTED = "permuted"
ROW_ORDERS = [ROW_ORDER_CYCLIC, ROW_ORDER_PERMUTED]

###############################################################################
# Network

DEFAULT_HIDDEN = 128
DEFAULT_HIDDEN2 = 64
DEFAULT_DROPOUT = 0.2
DEFAULT_PRIOR_MEAN = 0.0
DEFAULT_PRIOR_STD = 1.0
DEFAULT_RHO_INIT = -5.0
DEFAULT_KL_SCALE = 1.0

###############################################################################
# Optimisation

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

DEFAULT_LR = 1e-3
DEFAULT_GAMMA = 0.9
DEFAULT_MILESTONES = (1500, 2500, 3500)
DEFAULT_WEIGHT_DECAY = 5e-4
DEFAULT_MAX_EPOCHS = 4000

###############################################################################
# Dynamic Control

DEFAULT_T1 = 0.90
DEFAULT_T2 = 0.95
DEFAULT_Z = 1.96
DEFAULT_EVAL_SAMPLES = 30
DEFAULT_TRAIN_SAMPLES = 1

DEFAULT_PSEUDO_THRESHOLD = 0.9
DEFAULT_PSEUDO_START = 500
DEFAULT_PSEUDO_EVERY = 100
DEFAULT_PSEUDO_SAMPLES = 5

STOP_DYNAMIC = "dynamic"
STOP_BUDGET = "budget"
STOP_NUMERIC = "numeric"

###############################################################################
# Split

DEFAULT_SPLIT_RATIO = 0.1
FLAG_LABELED = "labeled"
FLAG_UNLABELED = "unlabeled"

###############################################################################

DEFAULT_SEED = 0
DEFAULT_OUTPUT_DIR = Path("blgcn_output")
DEFAULT_DATA_DIR = Path.home() / "blgcn_data"

DEFAULT_HISTORY_PATH = Path.home() / ".blgcn_history"
DEFAULT_STARTUP_SCRIPT = Path.home() / ".blgcnrc"

###############################################################################
