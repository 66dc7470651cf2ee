"""Dataset directory I/O, synthetic block-model benchmarks, noise injection.

Dataset directory format (plain text, one graph per directory):

    edges.txt     one ``i j`` pair per line, 0-indexed, undirected;
                  duplicate pairs are merged, self-loops rejected
    features.txt  N rows of D whitespace-separated reals
    labels.txt    N integer class ids, 0-indexed
    split.txt     three lines: train, validation, and test index lists

The loader validates counts, index bounds, symmetry, and the split contract
and reports the offending file and line on failure.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, GraphValidationError, validate_graph

logger = logging.getLogger(__name__)

FILES = ("edges.txt", "features.txt", "labels.txt", "split.txt")


def _fail(path: str, line: int | None, message: str):
    where = f"{path}:{line}" if line is not None else path
    raise GraphValidationError(f"{where}: {message}")


def load_dataset(path: str) -> Graph:
    """Read and validate a dataset directory."""
    for name in FILES:
        if not os.path.isfile(os.path.join(path, name)):
            _fail(os.path.join(path, name), None, "missing file")

    feat_path = os.path.join(path, "features.txt")
    rows = []
    width = None
    with open(feat_path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                row = [float(x) for x in parts]
            except ValueError:
                _fail(feat_path, lineno, f"non-numeric feature value in {line.strip()!r}")
            if width is None:
                width = len(row)
            elif len(row) != width:
                _fail(feat_path, lineno, f"expected {width} values, got {len(row)}")
            rows.append(row)
    if not rows:
        _fail(feat_path, None, "no feature rows")
    features = np.array(rows, dtype=np.float64)
    n = features.shape[0]

    label_path = os.path.join(path, "labels.txt")
    labels = []
    with open(label_path) as fh:
        for lineno, line in enumerate(fh, 1):
            token = line.strip()
            if not token:
                continue
            try:
                labels.append(int(token))
            except ValueError:
                _fail(label_path, lineno, f"non-integer label {token!r}")
            if labels[-1] < 0:
                _fail(label_path, lineno, f"negative label {labels[-1]}")
    if len(labels) != n:
        _fail(label_path, None, f"{len(labels)} labels for {n} feature rows")
    labels = np.array(labels, dtype=np.int64)

    edge_path = os.path.join(path, "edges.txt")
    adjacency = np.zeros((n, n))
    with open(edge_path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                _fail(edge_path, lineno, f"expected 'i j', got {line.strip()!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                _fail(edge_path, lineno, f"non-integer endpoint in {line.strip()!r}")
            if not (0 <= i < n and 0 <= j < n):
                _fail(edge_path, lineno, f"edge ({i}, {j}) out of range for {n} nodes")
            if i == j:
                _fail(edge_path, lineno, f"self-loop on node {i}")
            adjacency[i, j] = adjacency[j, i] = 1.0

    split_path = os.path.join(path, "split.txt")
    with open(split_path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        _fail(split_path, None, f"expected 3 index lines, got {len(lines)}")
    splits = []
    for lineno, line in enumerate(lines[:3], 1):
        try:
            splits.append(np.array([int(x) for x in line.split()], dtype=np.int64))
        except ValueError:
            _fail(split_path, lineno, f"non-integer index in {line.strip()!r}")

    graph = Graph(features, adjacency, labels, *splits)
    try:
        validate_graph(graph)
    except GraphValidationError as exc:
        _fail(path, None, str(exc))
    return graph


def write_dataset(graph: Graph, path: str) -> None:
    """Write the four-file directory format; loading it back round-trips."""
    os.makedirs(path, exist_ok=True)
    sources, targets = np.nonzero(np.triu(graph.adjacency, k=1) > 0)
    with open(os.path.join(path, "edges.txt"), "w") as fh:
        for i, j in zip(sources, targets):
            fh.write(f"{i} {j}\n")
    with open(os.path.join(path, "features.txt"), "w") as fh:
        for row in graph.features:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
    with open(os.path.join(path, "labels.txt"), "w") as fh:
        for y in graph.labels:
            fh.write(f"{y}\n")
    with open(os.path.join(path, "split.txt"), "w") as fh:
        for idx in (graph.train_idx, graph.val_idx, graph.test_idx):
            fh.write(" ".join(str(i) for i in idx) + "\n")


@dataclass
class SBMSpec:
    """Stochastic block model with class-separated Gaussian features."""

    classes: int = 4
    nodes_per_class: int = 250
    p_in: float = 0.05
    p_out: float = 0.005
    feature_dim: int = 16
    mean_separation: float = 1.0
    feature_noise: float = 1.0
    labels_per_class: int = 20
    val_per_class: int = 30
    seed: int = 0

    def validate(self) -> None:
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ValueError(f"need 0 <= p_out < p_in <= 1, got {self.p_out}, {self.p_in}")
        if self.feature_dim < self.classes:
            raise ValueError("feature_dim must be >= classes for orthogonal means")
        if self.labels_per_class + self.val_per_class >= self.nodes_per_class:
            raise ValueError("labels_per_class + val_per_class must leave test nodes")
        if self.feature_noise < 0 or self.mean_separation < 0:
            raise ValueError("feature_noise and mean_separation must be nonnegative")

    @classmethod
    def from_dict(cls, values: dict) -> "SBMSpec":
        from dataclasses import fields

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown SBM spec keys: {unknown}")
        spec = cls(**values)
        spec.validate()
        return spec


def generate_sbm(spec: SBMSpec) -> Graph:
    """Sample a block-model graph with a stratified train/val/test split.

    Class means are orthogonal coordinate directions scaled by
    ``mean_separation``; features add zero-mean Gaussian noise.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.classes * spec.nodes_per_class
    labels = np.repeat(np.arange(spec.classes), spec.nodes_per_class)

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, spec.p_in, spec.p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    adjacency = (upper | upper.T).astype(np.float64)

    means = np.zeros((spec.classes, spec.feature_dim))
    means[np.arange(spec.classes), np.arange(spec.classes)] = spec.mean_separation
    features = means[labels] + rng.normal(0.0, 1.0, (n, spec.feature_dim)) * spec.feature_noise

    train, val, test = [], [], []
    for c in range(spec.classes):
        members = rng.permutation(np.flatnonzero(labels == c))
        train.extend(members[: spec.labels_per_class])
        val.extend(members[spec.labels_per_class : spec.labels_per_class + spec.val_per_class])
        test.extend(members[spec.labels_per_class + spec.val_per_class :])
    graph = Graph(features, adjacency, labels,
                  np.sort(train), np.sort(val), np.sort(test))
    validate_graph(graph)
    return graph


def inject_label_noise(graph: Graph, lnr: float, seed: int) -> Graph:
    """Reassign floor(lnr * |train|) training labels to random other classes."""
    if not 0 <= lnr <= 1:
        raise ValueError(f"lnr must be in [0, 1], got {lnr}")
    out = graph.copy()
    count = int(lnr * len(graph.train_idx))
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    victims = rng.choice(graph.train_idx, size=count, replace=False)
    for i in victims:
        others = [c for c in range(graph.n_classes) if c != graph.labels[i]]
        out.labels[i] = others[rng.integers(len(others))]
    return out


def inject_graph_noise(graph: Graph, gnr: float, seed: int, mode: str = "add",
                       count: int | None = None) -> Graph:
    """Corrupt the structure with floor(gnr * |E|) edges.

    ``add`` inserts new edges between uniformly sampled non-adjacent pairs;
    ``rewire`` additionally removes the same number of existing edges. If
    fewer non-adjacent pairs exist than requested, all are used and the
    shortfall is logged. ``count`` overrides the ratio-derived number, which
    an edgeless graph would otherwise pin at zero.
    """
    if gnr < 0:
        raise ValueError(f"gnr must be nonnegative, got {gnr}")
    if mode not in ("add", "rewire"):
        raise ValueError(f"unknown graph noise mode {mode!r}")
    out = graph.copy()
    if count is None:
        count = int(gnr * graph.n_edges)
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(graph.n_nodes, k=1)
    absent = np.flatnonzero(graph.adjacency[iu, ju] == 0)
    placed = min(count, len(absent))
    if placed < count:
        logger.warning("graph noise: requested %d new edges, only %d pairs available",
                       count, placed)
    chosen = rng.choice(absent, size=placed, replace=False)
    if mode == "rewire":
        present = np.flatnonzero(graph.adjacency[iu, ju] > 0)
        removed = rng.choice(present, size=min(count, len(present)), replace=False)
        out.adjacency[iu[removed], ju[removed]] = 0.0
        out.adjacency[ju[removed], iu[removed]] = 0.0
    out.adjacency[iu[chosen], ju[chosen]] = 1.0
    out.adjacency[ju[chosen], iu[chosen]] = 1.0
    return out
