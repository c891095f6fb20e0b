#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Utility Functions
"""

import hashlib
import logging
from pathlib import Path

import numpy as np

from .constants import ROW_ORDERS

###############################################################################

LOGGER = logging.getLogger(__name__)

###############################################################################


def make_rng(seed: int, *streams: int) -> np.random.Generator:
    """Create a reproducible random generator

    Parameters
    ----------
    seed : int
        Root seed
    *streams : int
        Stream indices. Independent streams derived from the same root seed
        yield the same numbers regardless of the order in which they are used.
        Without streams, the generator is seeded by the root seed alone.

    Returns
    -------
    numpy.random.Generator
        Seeded generator
    """
    if not streams:
        return np.random.default_rng(seed)
    return np.random.default_rng([seed, *streams])


def sample_std(values) -> float:
    """Sample standard deviation (n - 1 denominator), 0 for a single value"""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def validate_row_order(row_order: str) -> str or None:
    """Validate the GAN replication order

    Parameters
    ----------
    row_order : str
        Replication order name

    Returns
    -------
    str or None
        If valid, row_order.lower()
        otherwise, None.
    """
    if row_order is not None:
        _order = row_order.lower() if row_order.lower() in ROW_ORDERS else None
        if _order is None:
            LOGGER.warning(f"Invalid replication order '{row_order}'.")
    else:
        _order = None

    return _order


def file_checksum(path: str or Path) -> str:
    """SHA-256 digest of a file, or 'missing' if it does not exist"""
    path = Path(path)
    if not path.is_file():
        return "missing"
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()

###############################################################################
