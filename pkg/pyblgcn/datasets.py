#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Public Hyperspectral Scenes

Download the MATLAB releases of the benchmark scenes and convert them to the
BLG1/BLGL containers understood by `pyblgcn.hsi_io`. Water-absorption bands
are expected to be removed already (the "corrected" releases).
"""

###############################################################################

import logging
from pathlib import Path
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import requests
from requests_downloader.downloader import download
from scipy.io import loadmat

from .errors import ConfigError, DataFormatError
from .hsi_io import HsiCube, save_cube, save_labels
from .constants import CUBE_FILE, LABELS_FILE, DEFAULT_DATA_DIR

###############################################################################

LOGGER = logging.getLogger(__name__)

SCENE_SERVER_URL = "http://www.ehu.eus/ccwintco/uploads/"

###############################################################################


@dataclass(frozen=True)
class Scene:
    """A public scene: MATLAB files and the variables holding the arrays"""
    name: str
    cube_path: str
    labels_path: str
    cube_key: str
    labels_key: str

    @property
    def cube_url(self) -> str:
        return requests.compat.urljoin(SCENE_SERVER_URL, self.cube_path)

    @property
    def labels_url(self) -> str:
        return requests.compat.urljoin(SCENE_SERVER_URL, self.labels_path)


SCENES: Dict[str, Scene] = {
    "indian_pines": Scene(
        name="indian_pines",
        cube_path="6/67/Indian_pines_corrected.mat",
        labels_path="c/c4/Indian_pines_gt.mat",
        cube_key="indian_pines_corrected",
        labels_key="indian_pines_gt",
    ),
    "salinas": Scene(
        name="salinas",
        cube_path="a/a3/Salinas_corrected.mat",
        labels_path="f/fa/Salinas_gt.mat",
        cube_key="salinas_corrected",
        labels_key="salinas_gt",
    ),
    "pavia_university": Scene(
        name="pavia_university",
        cube_path="e/ee/PaviaU.mat",
        labels_path="5/50/PaviaU_gt.mat",
        cube_key="paviaU",
        labels_key="paviaU_gt",
    ),
}

###############################################################################


def get_scene(name: str) -> Scene:
    try:
        return SCENES[name.lower()]
    except KeyError:
        raise ConfigError(
            f"Unknown scene '{name}', expected one of {sorted(SCENES)}"
        ) from None


def download_scene(
    name: str,
    data_dir: str or Path = None
) -> Tuple[Path, Path]:
    """Download the MATLAB files of a scene

    Files that already exist are not downloaded again.

    Parameters
    ----------
    name : str
        Scene name, a key of `SCENES`
    data_dir : str or Path, optional
        Directory to download into. If None, `DEFAULT_DATA_DIR / name`.
        The default is None.

    Returns
    -------
    tuple
        Paths of the cube and label MATLAB files
    """
    scene = get_scene(name)
    data_dir = Path(data_dir or DEFAULT_DATA_DIR / scene.name)
    data_dir.mkdir(parents=True, exist_ok=True)

    paths = []
    for url in (scene.cube_url, scene.labels_url):
        download_path = data_dir / url.rsplit("/", 1)[-1]
        if download_path.exists():
            LOGGER.info(f"'{download_path.name}' is already downloaded.")
        elif not download(url, download_path=download_path):
            raise DataFormatError(f"Download failed for '{url}'.")
        paths.append(download_path)
    return paths[0], paths[1]


def _mat_array(path: Path, key: str = None) -> np.ndarray:
    contents = loadmat(str(path))
    variables = [k for k in contents if not k.startswith("__")]
    if key is None:
        if len(variables) != 1:
            raise DataFormatError(
                f"Ambiguous MATLAB file, variables {variables}", path=path
            )
        key = variables[0]
    if key not in contents:
        raise DataFormatError(f"Variable '{key}' not found", path=path)
    return np.asarray(contents[key])


def convert_mat(
    cube_mat: str or Path,
    labels_mat: str or Path,
    out_dir: str or Path,
    cube_key: str = None,
    labels_key: str = None
) -> Tuple[Path, Path]:
    """Convert a MATLAB cube and ground truth to BLG1/BLGL files

    Parameters
    ----------
    cube_mat, labels_mat : str or Path
        MATLAB files holding the HxWxB cube and the HxW ground truth
    out_dir : str or Path
        Output directory; files are written as `CUBE_FILE` and `LABELS_FILE`
    cube_key, labels_key : str, optional
        MATLAB variable names. If None, the single variable of the file.

    Returns
    -------
    tuple
        Paths of the written cube and label files
    """
    values = _mat_array(Path(cube_mat), cube_key)
    labels = _mat_array(Path(labels_mat), labels_key)
    if values.ndim != 3 or labels.shape != values.shape[:2]:
        raise DataFormatError(
            f"Incompatible shapes {values.shape} and {labels.shape}",
            path=cube_mat
        )
    cube = HsiCube(values=values.astype(np.float64), labels=labels)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cube_path = save_cube(cube, out_dir / CUBE_FILE)
    labels_path = save_labels(cube, out_dir / LABELS_FILE)
    LOGGER.info(f"Converted {cube} to '{out_dir}'.")
    return cube_path, labels_path

###############################################################################
