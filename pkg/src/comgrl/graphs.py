"""Graph container, degree-normalized multi-hop adjacency, and hop neighborhoods.

The adjacency is a dense symmetric matrix with zero diagonal. Entries are
{0, 1} for freshly loaded graphs and may become fractional in [0, 1] after
structure mixing; reachability then means any strictly positive entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphValidationError(ValueError):
    """Raised when graph data violates the structural contract."""


@dataclass
class Graph:
    """Node features, symmetric adjacency, labels, and a train/val/test split."""

    features: np.ndarray
    adjacency: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    n_classes: int = field(default=0)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.val_idx = np.asarray(self.val_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        if self.n_classes == 0:
            self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_edges(self) -> int:
        """Undirected edge count over strictly positive entries."""
        return int(np.count_nonzero(np.triu(self.adjacency, k=1) > 0))

    def copy(self) -> "Graph":
        return Graph(
            self.features.copy(),
            self.adjacency.copy(),
            self.labels.copy(),
            self.train_idx.copy(),
            self.val_idx.copy(),
            self.test_idx.copy(),
            self.n_classes,
        )


def validate_graph(graph: Graph) -> None:
    """Check the structural invariants; raise GraphValidationError on violation."""
    n = graph.n_nodes
    a = graph.adjacency
    if a.shape != (n, n):
        raise GraphValidationError(f"adjacency shape {a.shape} does not match {n} nodes")
    if not np.array_equal(a, a.T):
        raise GraphValidationError("adjacency is not symmetric")
    if np.any(np.diag(a) != 0):
        raise GraphValidationError("adjacency has nonzero diagonal entries")
    if graph.labels.shape != (n,):
        raise GraphValidationError(f"labels shape {graph.labels.shape}, expected ({n},)")
    if np.any(graph.labels < 0) or np.any(graph.labels >= graph.n_classes):
        raise GraphValidationError("labels outside [0, n_classes)")
    splits = [graph.train_idx, graph.val_idx, graph.test_idx]
    names = ["train", "val", "test"]
    for name, idx in zip(names, splits):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise GraphValidationError(f"{name} split has out-of-range indices")
        if len(np.unique(idx)) != len(idx):
            raise GraphValidationError(f"{name} split has duplicate indices")
    combined = np.concatenate(splits)
    if len(np.unique(combined)) != len(combined):
        raise GraphValidationError("split sets are not disjoint")
    if graph.train_idx.size == 0:
        raise GraphValidationError("train split is empty")
    present = np.unique(graph.labels[graph.train_idx])
    if len(present) != graph.n_classes:
        missing = sorted(set(range(graph.n_classes)) - set(present.tolist()))
        raise GraphValidationError(f"classes {missing} have no training example")


def normalized_adjacency_power(adjacency: np.ndarray, radius: int) -> np.ndarray:
    """(D^-1/2 (A + I) D^-1/2)^radius with D the degree matrix of A + I.

    Works for fractional adjacencies: degrees are row sums of A + I, which
    are >= 1, so the normalization never divides by zero. The result is
    symmetric, entrywise nonnegative, with spectral radius <= 1.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    a = np.asarray(adjacency, dtype=np.float64)
    with_loops = a + np.eye(a.shape[0])
    inv_sqrt_deg = 1.0 / np.sqrt(with_loops.sum(axis=1))
    normed = with_loops * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    out = normed
    for _ in range(radius - 1):
        out = out @ normed
    return out


def hop_mask(adjacency: np.ndarray, radius: int) -> np.ndarray:
    """Boolean N x N matrix: True where 1 <= shortest-path distance <= radius.

    The diagonal is always False (a node is not its own neighbor). Edges are
    the strictly positive adjacency entries.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    step = sp.csr_matrix(np.asarray(adjacency) > 0, dtype=np.float64)
    reach = step.copy()
    power = step
    for _ in range(radius - 1):
        power = power @ step
        power.data[:] = 1.0
        reach = reach + power
    mask = reach.toarray() > 0
    np.fill_diagonal(mask, False)
    return mask


def hop_neighborhoods(adjacency: np.ndarray, radius: int) -> list[np.ndarray]:
    """Per-node sorted index arrays of neighbors within the hop radius."""
    mask = hop_mask(adjacency, radius)
    return [np.flatnonzero(mask[i]) for i in range(mask.shape[0])]


@dataclass
class ContrastCoefficients:
    """Nonnegative pairing weights: the normalized multi-hop adjacency value
    on the hop-neighborhood support, zero elsewhere (including the diagonal)."""

    s_con: np.ndarray
    hop_radius: int


def contrast_coefficients(adjacency: np.ndarray, radius: int) -> ContrastCoefficients:
    weighted = normalized_adjacency_power(adjacency, radius)
    support = hop_mask(adjacency, radius)
    return ContrastCoefficients(np.where(support, weighted, 0.0), radius)
