#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for `pyblgcn.utils`"""

import hashlib

import numpy as np
import pytest

from pyblgcn.utils import (
    make_rng, sample_std, validate_row_order, file_checksum
)

###############################################################################


def test_make_rng_streams():
    first = make_rng(7, 2, 5).random(4)
    np.testing.assert_array_equal(first, make_rng(7, 2, 5).random(4))
    assert not np.array_equal(first, make_rng(7, 2, 6).random(4))
    np.testing.assert_array_equal(
        make_rng(7).random(3), np.random.default_rng(7).random(3)
    )


def test_make_rng_order_independent():
    a_first = make_rng(1, 0).random()
    make_rng(1, 1).random()
    make_rng(1, 1).random()
    assert make_rng(1, 0).random() == a_first


def test_sample_std():
    assert sample_std([0.9, 1.0]) == pytest.approx(0.0707107, abs=1e-7)
    assert sample_std([0.5]) == 0.0


@pytest.mark.parametrize("row_order,result,log_messages", [
    ("cyclic", "cyclic", []),
    ("Permuted", "permuted", []),
    ("x", None, ["Invalid replication order 'x'."]),
    (None, None, []),
])
def test_validate_row_order(caplog, row_order, result, log_messages):
    assert validate_row_order(row_order) == result
    assert caplog.messages == log_messages


def test_file_checksum(tmp_path):
    path = tmp_path / "data.bin"
    path.write_bytes(b"hyperspectral")
    assert file_checksum(path) == hashlib.sha256(b"hyperspectral").hexdigest()
    assert file_checksum(tmp_path / "absent.bin") == "missing"
