"""Pseudo-label-guided node mixup: pair construction and data rectification.

A refresh builds the plan from the pristine graph and a classifier snapshot:
candidates are unlabeled nodes beyond the hop radius of every labeled node,
admitted class by class when their pseudo-label confidence clears the
threshold, and ranked by cosine similarity of sharpened neighborhood label
distributions. The winning pair per class interpolates the labeled node's
feature row and adjacency row/column toward the candidate's. Mixing always
starts from the original data, so repeated refreshes never compound.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PseudoLabels:
    """Snapshot of classifier probabilities with argmax labels and confidences."""

    probs: np.ndarray
    threshold: float
    hard: np.ndarray = field(init=False)
    confidence: np.ndarray = field(init=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.hard = self.probs.argmax(axis=1)
        self.confidence = self.probs.max(axis=1)


@dataclass
class MixPair:
    anchor: int       # labeled node, keeps its true label
    candidate: int    # distant unlabeled node with matching pseudo-label
    class_id: int
    lam: float
    similarity: float


@dataclass
class MixupPlan:
    pairs: list[MixPair]
    mixed_features: np.ndarray
    mixed_adjacency: np.ndarray

    def describe(self) -> list[dict]:
        return [
            {
                "anchor": int(p.anchor),
                "candidate": int(p.candidate),
                "class_id": int(p.class_id),
                "lambda": float(p.lam),
                "similarity": float(p.similarity),
            }
            for p in self.pairs
        ]


def candidate_set(hop: np.ndarray, train_idx: np.ndarray) -> np.ndarray:
    """Unlabeled nodes beyond the hop radius of every labeled node.

    ``hop`` is the boolean within-radius reachability matrix of the
    original graph.
    """
    n = hop.shape[0]
    near_labeled = hop[np.asarray(train_idx)].any(axis=0)
    keep = ~near_labeled
    keep[np.asarray(train_idx)] = False
    return np.flatnonzero(keep)


def class_partition(
    labels: np.ndarray,
    train_idx: np.ndarray,
    candidates: np.ndarray,
    pseudo: PseudoLabels,
    n_classes: int,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per class: (labeled nodes with that true class, confident candidates
    with that pseudo class)."""
    train_idx = np.asarray(train_idx)
    candidates = np.asarray(candidates)
    admitted = candidates[pseudo.confidence[candidates] >= pseudo.threshold]
    parts = {}
    for c in range(n_classes):
        labeled_c = np.sort(train_idx[labels[train_idx] == c])
        cand_c = np.sort(admitted[pseudo.hard[admitted] == c])
        parts[c] = (labeled_c, cand_c)
    return parts


def effective_onehot(labels: np.ndarray, train_idx: np.ndarray,
                     pseudo: PseudoLabels, n_classes: int) -> np.ndarray:
    """One-hot label matrix: true labels on the train set, pseudo elsewhere."""
    n = len(labels)
    chosen = pseudo.hard.copy()
    chosen[np.asarray(train_idx)] = labels[np.asarray(train_idx)]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), chosen] = 1.0
    return onehot


def neighborhood_label_distribution(
    adjacency: np.ndarray, onehot: np.ndarray, nodes: np.ndarray
) -> np.ndarray:
    """Mean one-hot label of each node's 1-hop neighbors; uniform if isolated."""
    nodes = np.asarray(nodes)
    k = onehot.shape[1]
    rows = np.empty((len(nodes), k))
    for pos, i in enumerate(nodes):
        nbrs = np.flatnonzero(adjacency[i] > 0)
        rows[pos] = onehot[nbrs].mean(axis=0) if nbrs.size else np.full(k, 1.0 / k)
    return rows


def sharpen(dist: np.ndarray, beta: float) -> np.ndarray:
    """Raise each row to 1/beta and renormalize; beta < 1 concentrates mass."""
    if not 0 < beta <= 1:
        raise ValueError(f"sharpening temperature must be in (0, 1], got {beta}")
    rows = np.atleast_2d(np.asarray(dist, dtype=np.float64))
    if np.any(rows < 0):
        raise ValueError("sharpen: negative entries")
    totals = rows.sum(axis=1)
    if np.any(totals == 0):
        raise ValueError("sharpen: all-zero distribution")
    powered = rows ** (1.0 / beta)
    out = powered / powered.sum(axis=1, keepdims=True)
    return out[0] if np.asarray(dist).ndim == 1 else out


def nld_similarity(rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
    """Cosine similarity between all cross pairs of distribution rows."""
    na = np.linalg.norm(rows_a, axis=1, keepdims=True)
    nb = np.linalg.norm(rows_b, axis=1, keepdims=True)
    sims = (rows_a / na) @ (rows_b / nb).T
    return np.clip(sims, 0.0, 1.0)


def select_pairs(
    parts: dict[int, tuple[np.ndarray, np.ndarray]],
    sims: dict[int, np.ndarray],
) -> list[tuple[int, int, int, float]]:
    """Per class, the cross pair with maximal similarity.

    Ties resolve to the smallest (labeled, candidate) node-index pair, which
    with sorted member lists is the first row-major maximum.
    """
    chosen = []
    for c in sorted(parts):
        labeled_c, cand_c = parts[c]
        if labeled_c.size == 0 or cand_c.size == 0:
            continue
        s = sims[c]
        r, col = np.unravel_index(np.argmax(s), s.shape)
        chosen.append((int(labeled_c[r]), int(cand_c[col]), c, float(s[r, col])))
    return chosen


def mix_features(features: np.ndarray, pairs: list[MixPair]) -> np.ndarray:
    """Write lam * x_anchor + (1 - lam) * x_candidate at each anchor row."""
    mixed = features.copy()
    for p in pairs:
        mixed[p.anchor] = p.lam * features[p.anchor] + (1.0 - p.lam) * features[p.candidate]
    return mixed


def mix_structure(adjacency: np.ndarray, pairs: list[MixPair]) -> np.ndarray:
    """Interpolate each anchor's row and column toward the candidate's, then
    restore symmetry by averaging with the transpose."""
    anchors = [p.anchor for p in pairs]
    if len(set(anchors)) != len(anchors):
        raise ValueError("mix_structure: overlapping anchor indices")
    mixed = adjacency.copy()
    for p in pairs:
        mixed[p.anchor, :] = p.lam * adjacency[p.anchor, :] + (1.0 - p.lam) * adjacency[p.candidate, :]
        mixed[:, p.anchor] = p.lam * adjacency[:, p.anchor] + (1.0 - p.lam) * adjacency[:, p.candidate]
    mixed = (mixed + mixed.T) / 2.0
    if mixed.min() < 0.0 or mixed.max() > 1.0:
        raise AssertionError("mix_structure: interpolated entries left [0, 1]")
    return mixed


def build_mixup_plan(
    features: np.ndarray,
    adjacency: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    candidates: np.ndarray,
    pseudo: PseudoLabels,
    n_classes: int,
    sharpen_beta: float,
    rng: np.random.Generator,
    mix_beta_a: float = 1.0,
    fixed_lam: float | None = None,
) -> MixupPlan | None:
    """Assemble a refresh plan from the pristine data; None when no class has
    both a labeled node and an admitted candidate."""
    if len(candidates) == 0:
        return None
    parts = class_partition(labels, train_idx, candidates, pseudo, n_classes)
    members = np.unique(np.concatenate([np.concatenate(parts[c]) for c in parts]))
    if members.size == 0:
        return None
    onehot = effective_onehot(labels, train_idx, pseudo, n_classes)
    nld = neighborhood_label_distribution(adjacency, onehot, members)
    sharpened = sharpen(nld, sharpen_beta)
    row_of = {int(node): i for i, node in enumerate(members)}
    sims = {}
    for c, (labeled_c, cand_c) in parts.items():
        if labeled_c.size and cand_c.size:
            sims[c] = nld_similarity(
                sharpened[[row_of[int(i)] for i in labeled_c]],
                sharpened[[row_of[int(j)] for j in cand_c]],
            )
    selected = select_pairs(parts, sims)
    if not selected:
        return None
    pairs = []
    for anchor, cand, c, sim in selected:
        lam = fixed_lam if fixed_lam is not None else float(rng.beta(mix_beta_a, mix_beta_a))
        pairs.append(MixPair(anchor, cand, c, lam, sim))
    return MixupPlan(pairs, mix_features(features, pairs), mix_structure(adjacency, pairs))


def _within_hops(adjacency: np.ndarray, source: int, targets: set[int], radius: int) -> bool:
    """Breadth-first search: is any target within `radius` hops of source?"""
    seen = {source}
    frontier = deque([(source, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if depth == radius:
            continue
        for nbr in np.flatnonzero(adjacency[node] > 0):
            nbr = int(nbr)
            if nbr in seen:
                continue
            if nbr in targets:
                return True
            seen.add(nbr)
            frontier.append((nbr, depth + 1))
    return False


def verify_plan(
    plan: MixupPlan,
    adjacency: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    pseudo: PseudoLabels,
    radius: int,
) -> list[dict]:
    """Independent brute-force re-check of every pair's selection constraints."""
    labeled = set(int(i) for i in train_idx)
    verdicts = []
    for p in plan.pairs:
        checks = {
            "candidate_unlabeled": p.candidate not in labeled,
            "beyond_hop_radius": not _within_hops(adjacency, p.candidate, labeled, radius),
            "pseudo_class_matches": int(pseudo.hard[p.candidate]) == p.class_id,
            "confident": float(pseudo.confidence[p.candidate]) >= pseudo.threshold,
            "anchor_class_matches": int(labels[p.anchor]) == p.class_id,
            "anchor_labeled": p.anchor in labeled,
        }
        verdicts.append({"anchor": p.anchor, "candidate": p.candidate,
                         "class_id": p.class_id, "checks": checks,
                         "ok": all(checks.values())})
    return verdicts
