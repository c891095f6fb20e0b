#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Superpixel Segmentation and Graph Construction

SLIC segmentation of a hyperspectral cube, majority-vote labelling of the
superpixels, removal of background superpixels, and construction of the node
feature matrix F = (t ∥ s) together with the binary adjacency matrix A.
"""

###############################################################################

import math
import logging
from pathlib import Path
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ContractError, DataFormatError
from .hsi_io import HsiCube
from .utils import make_rng
from .constants import (
    DEFAULT_N_SEGMENTS,
    DEFAULT_COMPACTNESS,
    DEFAULT_SLIC_ITERATIONS,
    DEFAULT_SEED,
)

###############################################################################

LOGGER = logging.getLogger(__name__)

FOUR_CONNECTIVITY = ndimage.generate_binary_structure(2, 1)

###############################################################################


@dataclass
class SlicConfig:
    """SLIC parameters

    `jitter` displaces every grid seed by up to `jitter·S` pixels (S being the
    grid interval) using the seeded generator; at 0 seeds sit on the exact
    grid and `seed` has no effect.
    """
    n_segments: int = DEFAULT_N_SEGMENTS
    compactness: float = DEFAULT_COMPACTNESS
    iterations: int = DEFAULT_SLIC_ITERATIONS
    jitter: float = 0.0
    seed: int = DEFAULT_SEED


@dataclass(eq=False)
class Segmentation:
    """Per-pixel superpixel ids, dense in 0..n_segments-1"""
    labels: np.ndarray = field(repr=False)

    @property
    def n_segments(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def shape(self) -> tuple:
        return self.labels.shape

    def __repr__(self) -> str:
        return f"Segmentation(shape={self.shape}, segments={self.n_segments})"


def save_segmentation(segmentation: Segmentation, path: str or Path) -> Path:
    path = Path(path)
    with open(path, "wb") as f:
        np.save(f, segmentation.labels.astype(np.int64))
    return path


def load_segmentation(path: str or Path) -> Segmentation:
    try:
        labels = np.load(Path(path), allow_pickle=False)
    except ValueError as error:
        raise DataFormatError(str(error), path=path) from None
    if labels.ndim != 2:
        raise DataFormatError(f"Expected HxW ids, got {labels.shape}",
                              path=path)
    return Segmentation(labels=labels.astype(np.int64))

###############################################################################
# SLIC


def _grid_seeds(height: int, width: int, n_segments: int) -> np.ndarray:
    """About `n_segments` seeds on a grid with the image's aspect ratio"""
    cols = round(math.sqrt(n_segments * width / height))
    cols = max(1, min(width, n_segments, cols))
    rows = max(1, min(height, round(n_segments / cols)))
    ys = np.floor((np.arange(rows) + 0.5) * height / rows)
    xs = np.floor((np.arange(cols) + 0.5) * width / cols)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([grid_y.ravel(), grid_x.ravel()], axis=1)


def _joint_distance(
    pixels: np.ndarray,
    coords: np.ndarray,
    center_spectrum: np.ndarray,
    center_yx: np.ndarray,
    spatial_weight: float
) -> np.ndarray:
    d_spectral = np.sqrt(((pixels - center_spectrum) ** 2).sum(axis=-1))
    d_spatial = np.sqrt(((coords - center_yx) ** 2).sum(axis=-1))
    return d_spectral + spatial_weight * d_spatial


def _assign(values, centers_yx, centers_spectra, interval, spatial_weight):
    height, width, _ = values.shape
    distance = np.full((height, width), np.inf)
    assignment = np.full((height, width), -1, dtype=np.int64)
    radius = int(math.ceil(interval))

    for k, (cy, cx) in enumerate(centers_yx):
        y0, y1 = max(int(cy) - radius, 0), min(int(cy) + radius + 1, height)
        x0, x1 = max(int(cx) - radius, 0), min(int(cx) + radius + 1, width)
        ys, xs = np.mgrid[y0:y1, x0:x1]
        coords = np.stack([ys, xs], axis=-1).astype(np.float64)
        window = _joint_distance(
            values[y0:y1, x0:x1], coords,
            centers_spectra[k], centers_yx[k], spatial_weight
        )
        region = distance[y0:y1, x0:x1]
        closer = window < region
        region[closer] = window[closer]
        assignment[y0:y1, x0:x1][closer] = k

    # pixels outside every search window go to the overall nearest center
    orphans = np.argwhere(assignment < 0)
    if orphans.size:
        pixels = values[orphans[:, 0], orphans[:, 1]]
        joint = np.stack([
            _joint_distance(
                pixels, orphans.astype(np.float64),
                centers_spectra[k], centers_yx[k], spatial_weight
            )
            for k in range(len(centers_yx))
        ], axis=1)
        assignment[orphans[:, 0], orphans[:, 1]] = joint.argmin(axis=1)
    return assignment


def _update_centers(values, assignment, centers_yx, centers_spectra):
    height, width, bands = values.shape
    n_centers = len(centers_yx)
    flat = assignment.ravel()
    counts = np.bincount(flat, minlength=n_centers).astype(np.float64)
    ys, xs = np.divmod(np.arange(flat.size), width)
    sum_y = np.bincount(flat, weights=ys, minlength=n_centers)
    sum_x = np.bincount(flat, weights=xs, minlength=n_centers)
    sum_spectra = np.zeros((n_centers, bands))
    np.add.at(sum_spectra, flat, values.reshape(-1, bands))

    filled = counts > 0
    centers_yx[filled, 0] = sum_y[filled] / counts[filled]
    centers_yx[filled, 1] = sum_x[filled] / counts[filled]
    centers_spectra[filled] = sum_spectra[filled] / counts[filled, None]


def _enforce_connectivity(assignment: np.ndarray, min_size: int):
    """Merge orphan and undersized fragments into their largest neighbour"""
    labels = assignment.copy()
    sizes = np.bincount(labels.ravel()).astype(np.int64)

    fragments = []
    for k, bbox in enumerate(ndimage.find_objects(labels + 1)):
        if bbox is None:
            continue
        components, n_components = ndimage.label(
            labels[bbox] == k, structure=FOUR_CONNECTIVITY
        )
        if n_components == 0:
            continue
        component_sizes = np.bincount(components.ravel())[1:]
        keep = int(component_sizes.argmax()) + 1
        for component in range(1, n_components + 1):
            size = int(component_sizes[component - 1])
            if component != keep or size < min_size:
                local = np.argwhere(components == component)
                coords = local + [bbox[0].start, bbox[1].start]
                fragments.append((k, coords))

    for k, coords in fragments:
        mask = np.zeros(labels.shape, dtype=bool)
        mask[coords[:, 0], coords[:, 1]] = True
        ring = ndimage.binary_dilation(mask, structure=FOUR_CONNECTIVITY)
        ring &= ~mask
        neighbours = np.unique(labels[ring])
        neighbours = neighbours[neighbours != k]
        if neighbours.size == 0:
            continue
        # largest neighbour, ties toward the smaller id
        target = int(neighbours[np.argmax(sizes[neighbours])])
        labels[mask] = target
        sizes[k] -= len(coords)
        sizes[target] += len(coords)
    return labels


def slic_segment(
    cube: HsiCube,
    n_segments: int = DEFAULT_N_SEGMENTS,
    compactness: float = DEFAULT_COMPACTNESS,
    iterations: int = DEFAULT_SLIC_ITERATIONS,
    seed: int = DEFAULT_SEED,
    jitter: float = 0.0
) -> Segmentation:
    """Simple linear iterative clustering over full spectra

    The distance between a pixel and a cluster center is
    `D = d_spectral + (compactness / S) · d_spatial` with grid interval
    `S = sqrt(H·W / n_segments)`. Centers start on a regular grid of
    about `n_segments` seeds whose rows and columns follow the image aspect
    ratio, and each searches a 2S x 2S window. After the last iteration,
    fragments that are disconnected from their cluster's main body or smaller
    than a quarter of the average superpixel are merged into the largest
    adjacent cluster.

    Parameters
    ----------
    cube : HsiCube
        Cube to segment (normalised values recommended)
    n_segments : int, optional
        Target number of superpixels K.
        The default is `DEFAULT_N_SEGMENTS`.
    compactness : float, optional
        Weight of the spatial term.
        The default is `DEFAULT_COMPACTNESS`.
    iterations : int, optional
        K-means iterations.
        The default is `DEFAULT_SLIC_ITERATIONS`.
    seed : int, optional
        Seed for the grid jitter.
        The default is `DEFAULT_SEED`.
    jitter : float, optional
        Maximum seed displacement in units of S.
        The default is 0.0.

    Returns
    -------
    Segmentation
        Dense superpixel ids

    Raises
    ------
    ConfigError
        If `n_segments` is below 1 or above the pixel count, or
        `iterations` is below 1.
    """
    height, width = cube.height, cube.width
    n_pixels = height * width
    if n_segments < 1 or n_segments > n_pixels:
        raise ConfigError(
            f"Number of superpixels must lie in [1, {n_pixels}], "
            f"got {n_segments}"
        )
    if iterations < 1:
        raise ConfigError(f"SLIC needs >= 1 iteration, got {iterations}")

    values = cube.values
    interval = math.sqrt(n_pixels / n_segments)
    spatial_weight = compactness / interval

    centers_yx = _grid_seeds(height, width, n_segments)
    if jitter > 0:
        rng = make_rng(seed)
        centers_yx += rng.uniform(
            -jitter * interval, jitter * interval, size=centers_yx.shape
        )
        centers_yx[:, 0] = np.clip(np.round(centers_yx[:, 0]), 0, height - 1)
        centers_yx[:, 1] = np.clip(np.round(centers_yx[:, 1]), 0, width - 1)
    seed_idx = centers_yx.astype(np.int64)
    centers_spectra = values[seed_idx[:, 0], seed_idx[:, 1]].copy()

    for iteration in range(iterations):
        assignment = _assign(
            values, centers_yx, centers_spectra, interval, spatial_weight
        )
        _update_centers(values, assignment, centers_yx, centers_spectra)

    min_size = max(1, int(n_pixels / n_segments / 4))
    merged = _enforce_connectivity(assignment, min_size)
    _, dense = np.unique(merged, return_inverse=True)
    segmentation = Segmentation(labels=dense.reshape(height, width))
    LOGGER.info(
        f"SLIC produced {segmentation.n_segments} superpixels "
        f"(target {n_segments})."
    )
    return segmentation

###############################################################################
# Graph


@dataclass(eq=False)
class SuperpixelGraph:
    """Superpixel nodes, their features, labels and adjacency

    Attributes
    ----------
    features : np.ndarray
        n x (d+1) matrix F; the first d columns are per-band means t, the last
        column is s = Σ t².
    adjacency : np.ndarray
        n x n binary symmetric matrix A with zero diagonal
    labels : np.ndarray
        Class of every node, 1..num_classes
    members : list
        Flat pixel indices of every node (empty for synthesized nodes)
    segment_ids : np.ndarray
        Segmentation id of every node, -1 for synthesized nodes
    num_classes : int
        Number of classes C of the scene
    """
    features: np.ndarray = field(repr=False)
    adjacency: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    members: List[np.ndarray] = field(repr=False, default=None)
    segment_ids: np.ndarray = field(repr=False, default=None)
    num_classes: int = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n_nodes = self.features.shape[0]
        if self.members is None:
            self.members = [np.zeros(0, dtype=np.int64)] * n_nodes
        if self.segment_ids is None:
            self.segment_ids = np.full(n_nodes, -1, dtype=np.int64)
        self.segment_ids = np.asarray(self.segment_ids, dtype=np.int64)
        if self.num_classes is None:
            self.num_classes = int(self.labels.max()) if n_nodes else 0
        if not (
            self.adjacency.shape == (n_nodes, n_nodes)
            and self.labels.shape == (n_nodes,)
            and len(self.members) == n_nodes
            and self.segment_ids.shape == (n_nodes,)
        ):
            raise ContractError("Inconsistent superpixel graph dimensions.")

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_bands(self) -> int:
        return self.features.shape[1] - 1

    def class_counts(self) -> np.ndarray:
        """Node count of classes 1..num_classes (index 0 is class 1)"""
        return np.bincount(self.labels, minlength=self.num_classes + 1)[1:]

    def pixel_counts(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], dtype=np.int64)

    def __repr__(self) -> str:
        return (
            f"SuperpixelGraph(nodes={self.n_nodes}, "
            f"features={self.n_features}, "
            f"edges={int(self.adjacency.sum() // 2)}, "
            f"classes={self.num_classes})"
        )


def spectral_feature(texture: np.ndarray) -> np.ndarray:
    """s = Σ_b t_b², one value per row"""
    return (np.asarray(texture) ** 2).sum(axis=-1)


def segment_adjacency(labels: np.ndarray, n_segments: int) -> np.ndarray:
    """A[i][j] = 1 iff a pixel of i is 4-adjacent to a pixel of j"""
    adjacency = np.zeros((n_segments, n_segments), dtype=np.float64)
    for first, second in (
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
    ):
        differ = first != second
        adjacency[first[differ], second[differ]] = 1.0
        adjacency[second[differ], first[differ]] = 1.0
    return adjacency


def build_graph(segmentation: Segmentation, cube: HsiCube) -> SuperpixelGraph:
    """Build the superpixel graph of a segmented cube

    Every superpixel receives the per-band mean t of its pixels, the scalar
    s = Σ t² and the majority label of its pixels (ties toward the smaller
    class id). Superpixels whose majority is background are removed.

    Raises
    ------
    ContractError
        On an empty segmentation or a shape mismatch with the cube.
    """
    if segmentation.labels.size == 0 or segmentation.n_segments == 0:
        raise ContractError("Empty segmentation.")
    if segmentation.shape != (cube.height, cube.width):
        raise ContractError(
            f"Segmentation {segmentation.shape} does not match cube "
            f"{(cube.height, cube.width)}"
        )

    flat = segmentation.labels.ravel()
    n_segments = segmentation.n_segments
    counts = np.bincount(flat, minlength=n_segments)
    sums = np.zeros((n_segments, cube.bands))
    np.add.at(sums, flat, cube.pixels())
    texture = sums / np.maximum(counts, 1)[:, None]

    votes = np.zeros((n_segments, cube.num_classes + 1), dtype=np.int64)
    np.add.at(votes, (flat, cube.labels.ravel()), 1)
    majority = votes.argmax(axis=1)

    keep = np.flatnonzero((majority > 0) & (counts > 0))
    adjacency = segment_adjacency(segmentation.labels, n_segments)
    adjacency = adjacency[np.ix_(keep, keep)]

    order = np.argsort(flat, kind="stable")
    groups = np.split(order, np.cumsum(counts)[:-1])

    features = np.column_stack(
        [texture[keep], spectral_feature(texture[keep])]
    )
    graph = SuperpixelGraph(
        features=features,
        adjacency=adjacency,
        labels=majority[keep],
        members=[groups[idx] for idx in keep],
        segment_ids=keep,
        num_classes=cube.num_classes,
    )
    LOGGER.info(
        f"Built {graph}; {n_segments - keep.size} background superpixels "
        "removed."
    )
    return graph


def renormalize(adjacency: np.ndarray) -> np.ndarray:
    """Â_G = D̂^(-1/2) (A + I) D̂^(-1/2) with D̂_ii = Σ_j (A + I)_ij"""
    adjacency = np.asarray(adjacency, dtype=np.float64)
    a_hat = adjacency + np.eye(adjacency.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]

###############################################################################
# Text Export


def export_graph(graph: SuperpixelGraph, path: str or Path) -> Path:
    """Write the graph in the inspection text format

    ::

        nodes <n> <d+1> <num_classes>
        <id> <label> <t_1> .. <t_d> <s>
        edges <m>
        <i> <j>
        segments <n>
        <id> <segment id>
    """
    path = Path(path)
    lines = [f"nodes {graph.n_nodes} {graph.n_features} {graph.num_classes}"]
    for idx, (label, row) in enumerate(zip(graph.labels, graph.features)):
        values = " ".join(repr(float(value)) for value in row)
        lines.append(f"{idx} {int(label)} {values}")
    rows, cols = np.nonzero(np.triu(graph.adjacency, k=1))
    lines.append(f"edges {rows.size}")
    lines.extend(f"{i} {j}" for i, j in zip(rows, cols))
    lines.append(f"segments {graph.n_nodes}")
    lines.extend(
        f"{idx} {int(seg)}" for idx, seg in enumerate(graph.segment_ids)
    )
    path.write_text("\n".join(lines) + "\n")
    return path


def _section(lines, position, keyword, path):
    try:
        header = lines[position].split()
        if header[0] != keyword:
            raise ValueError
        return [int(value) for value in header[1:]]
    except (IndexError, ValueError):
        raise DataFormatError(
            f"Expected '{keyword}' section", path=path, offset=position + 1
        ) from None


def load_graph(
    path: str or Path,
    segmentation: Segmentation = None
) -> SuperpixelGraph:
    """Read a graph written by `export_graph`

    If `segmentation` is given, node members are rebuilt from it.
    """
    lines = Path(path).read_text().splitlines()
    position = 0
    n_nodes, n_features, num_classes = _section(lines, position, "nodes", path)
    position += 1

    features = np.zeros((n_nodes, n_features))
    labels = np.zeros(n_nodes, dtype=np.int64)
    try:
        for idx in range(n_nodes):
            fields = lines[position].split()
            if int(fields[0]) != idx or len(fields) != n_features + 2:
                raise ValueError
            labels[idx] = int(fields[1])
            features[idx] = [float(value) for value in fields[2:]]
            position += 1
    except (IndexError, ValueError):
        raise DataFormatError(
            "Malformed node line", path=path, offset=position + 1
        ) from None

    (n_edges,) = _section(lines, position, "edges", path)
    position += 1
    adjacency = np.zeros((n_nodes, n_nodes))
    try:
        for _ in range(n_edges):
            i, j = (int(value) for value in lines[position].split())
            adjacency[i, j] = adjacency[j, i] = 1.0
            position += 1
    except (IndexError, ValueError):
        raise DataFormatError(
            "Malformed edge line", path=path, offset=position + 1
        ) from None

    _section(lines, position, "segments", path)
    position += 1
    segment_ids = np.zeros(n_nodes, dtype=np.int64)
    try:
        for idx in range(n_nodes):
            segment_ids[idx] = int(lines[position].split()[1])
            position += 1
    except (IndexError, ValueError):
        raise DataFormatError(
            "Malformed segment line", path=path, offset=position + 1
        ) from None

    members = None
    if segmentation is not None:
        flat = segmentation.labels.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=segmentation.n_segments)
        groups = np.split(order, np.cumsum(counts)[:-1])
        members = [
            groups[segment] if segment >= 0 else np.zeros(0, dtype=np.int64)
            for segment in segment_ids
        ]

    return SuperpixelGraph(
        features=features,
        adjacency=adjacency,
        labels=labels,
        members=members,
        segment_ids=segment_ids,
        num_classes=num_classes,
    )

###############################################################################
