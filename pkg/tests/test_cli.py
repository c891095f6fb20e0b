#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for `pyblgcn.cli`"""

import numpy as np
import pytest
from scipy.io import savemat

from pyblgcn import cli
from pyblgcn.cli import main, exit_code
from pyblgcn.hsi_io import load_cube
from pyblgcn.errors import (
    BLGCNError, ConfigError, ContractError, DataFormatError, NumericalError
)
from pyblgcn.constants import (
    CUBE_FILE, LABELS_FILE, GRAPH_FILE, MANIFEST_FILE, REPORT_FILE,
    TRIALS_DB_FILE,
    EXIT_OK, EXIT_FAILURE, EXIT_CONFIG_ERROR, EXIT_DATA_ERROR,
    EXIT_NUMERIC_ERROR
)

###############################################################################

SMALL_SCENE = [
    "-s", "synth_blob=8", "-s", "synth_gap=4", "-s", "n_segments=40"
]

###############################################################################


@pytest.mark.parametrize("error,code", [
    (ConfigError("bad key"), EXIT_CONFIG_ERROR),
    (DataFormatError("bad magic"), EXIT_DATA_ERROR),
    (FileNotFoundError("cube.blg"), EXIT_DATA_ERROR),
    (NumericalError("nan"), EXIT_NUMERIC_ERROR),
    (ContractError("mismatch"), EXIT_FAILURE),
    (BLGCNError("other"), EXIT_FAILURE),
])
def test_exit_code(error, code):
    assert exit_code(error) == code


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["-v"])
    assert "0.1.0" in capsys.readouterr().out


def test_no_command(capsys):
    assert main([]) == EXIT_FAILURE
    output = capsys.readouterr().out
    assert output.startswith("Must specify a command in non-interactive mode.")

###############################################################################


def test_synth(tmp_path, capsys):
    assert main(["synth", "-o", str(tmp_path)] + SMALL_SCENE) == EXIT_OK
    cube = load_cube(tmp_path / CUBE_FILE, tmp_path / LABELS_FILE)
    assert cube.num_classes == 4
    assert f"written to '{tmp_path}'" in capsys.readouterr().out


def test_preprocess(tmp_path):
    out = tmp_path / "run"
    assert main(["preprocess", "-o", str(out)] + SMALL_SCENE) == EXIT_OK
    assert (out / GRAPH_FILE).is_file()
    text = (out / MANIFEST_FILE).read_text()
    assert "status=complete" in text.splitlines()


def test_config_file(tmp_path):
    config_path = tmp_path / "run.cfg"
    config_path.write_text(
        "synth_blob = 8\nsynth_gap = 4\nsynth_classes = 2\n"
    )
    out = tmp_path / "run"
    assert main(["synth", "-c", str(config_path), "-o", str(out)]) == EXIT_OK
    assert load_cube(out / CUBE_FILE, out / LABELS_FILE).num_classes == 2

###############################################################################


def test_invalid_setting(tmp_path):
    assert main(["train", "-o", str(tmp_path), "-s", "t1=0.99"]) == \
        EXIT_CONFIG_ERROR
    assert main(["train", "-s", "hidden_units=4"]) == EXIT_CONFIG_ERROR


def test_missing_inputs(tmp_path):
    assert main(["-c", str(tmp_path / "absent.cfg"), "synth"]) == \
        EXIT_DATA_ERROR
    assert main(["evaluate", "-o", str(tmp_path / "empty")]) == \
        EXIT_DATA_ERROR


def test_download_needs_scene(tmp_path):
    assert main(["download", "-o", str(tmp_path)]) == EXIT_CONFIG_ERROR
    assert main(["download", "houston", "-o", str(tmp_path)]) == \
        EXIT_CONFIG_ERROR


def test_download_converts(tmp_path, monkeypatch):
    values = np.ones((2, 3, 4))
    labels = np.array([[1, 0, 2], [2, 1, 0]])

    def fake_download_scene(name, data_dir):
        cube_mat = tmp_path / "Salinas_corrected.mat"
        labels_mat = tmp_path / "Salinas_gt.mat"
        savemat(cube_mat, {"salinas_corrected": values})
        savemat(labels_mat, {"salinas_gt": labels})
        return cube_mat, labels_mat

    monkeypatch.setattr(cli, "download_scene", fake_download_scene)
    out = tmp_path / "salinas"
    assert main(["download", "salinas", "-o", str(out)]) == EXIT_OK
    cube = load_cube(out / CUBE_FILE, out / LABELS_FILE)
    np.testing.assert_array_equal(cube.labels, labels)

###############################################################################


def test_pipeline_trials(tmp_path, capsys):
    out = tmp_path / "run"
    quick = [
        "-s", "hidden=8", "-s", "hidden2=4", "-s", "max_epochs=20",
        "-s", "eval_samples=3", "-s", "gan_epochs=5"
    ]
    argv = ["pipeline", "--trials", "2", "-o", str(out)] + SMALL_SCENE
    assert main(argv + quick) == EXIT_OK
    assert "Trials: 2" in capsys.readouterr().out
    assert (out / TRIALS_DB_FILE).is_file()
    assert "Trials: 2" in (out / REPORT_FILE).read_text()


def test_trials_flag_is_validated(tmp_path):
    argv = ["pipeline", "-t", "0", "-o", str(tmp_path)]
    assert main(argv) == EXIT_CONFIG_ERROR
