"""Global multi-head self-attention stack, classifier head, and cross-entropy.

The default attention path is the factorized linear-cost form: query rows
are softmax-normalized over features, key columns over nodes, and the value
aggregation happens through a small feature-by-feature context matrix, so
cost grows linearly with the node count. The quadratic softmax(QK^T/sqrt(d))V
form is kept as an optional mode and as a test oracle.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def standard_attention(z: Tensor, w_q: Tensor, w_k: Tensor, w_v: Tensor) -> Tensor:
    """softmax(Q K^T / sqrt(d)) V with row-wise softmax; quadratic in nodes."""
    q = ad.matmul(z, w_q)
    k = ad.matmul(z, w_k)
    v = ad.matmul(z, w_v)
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(w_q.cols))
    return ad.matmul(ad.row_softmax(scores), v)


def efficient_attention(z: Tensor, w_q: Tensor, w_k: Tensor, w_v: Tensor) -> Tensor:
    """Factorized attention: softmax_rows(Q) @ (softmax_cols(K)^T @ V).

    Each key column forms convex weights over nodes, giving a d x d context
    of value mixtures; each query row then takes a convex combination of the
    context rows, which keeps outputs inside the context's coordinate range.
    """
    q = ad.row_softmax(ad.matmul(z, w_q))
    k = ad.col_softmax(ad.matmul(z, w_k))
    v = ad.matmul(z, w_v)
    context = ad.matmul(ad.transpose(k), v)
    return ad.matmul(q, context)


class AttentionLayer:
    """One multi-head block: heads, concat, mixing, residual, LN, feed-forward.

    Head outputs are concatenated to the hidden width and mixed by a square
    matrix; the input is added back when its width matches (the residual is
    skipped for a width-changing first layer), then a layer-normalized
    rectifier feed-forward with another residual follows.
    """

    def __init__(self, in_dim: int, hidden: int, heads: int, rng: np.random.Generator,
                 mode: str = "efficient"):
        if hidden % heads != 0:
            raise ValueError(f"hidden width {hidden} not divisible by {heads} heads")
        if mode not in ("efficient", "standard"):
            raise ValueError(f"unknown attention mode {mode!r}")
        head_dim = hidden // heads
        self.w_q = [ad.uniform_parameter(in_dim, head_dim, rng) for _ in range(heads)]
        self.w_k = [ad.uniform_parameter(in_dim, head_dim, rng) for _ in range(heads)]
        self.w_v = [ad.uniform_parameter(in_dim, head_dim, rng) for _ in range(heads)]
        self.w_mix = ad.uniform_parameter(hidden, hidden, rng)
        self.ln_gain = ad.parameter(np.ones((1, hidden)))
        self.ln_shift = ad.parameter(np.zeros((1, hidden)))
        self.w_ff_in = ad.uniform_parameter(hidden, hidden, rng)
        self.w_ff_out = ad.uniform_parameter(hidden, hidden, rng)
        self.in_dim = in_dim
        self.hidden = hidden
        self.heads = heads
        self.mode = mode

    def __call__(self, z: Tensor) -> Tensor:
        attend = efficient_attention if self.mode == "efficient" else standard_attention
        head_outs = [
            attend(z, self.w_q[i], self.w_k[i], self.w_v[i]) for i in range(self.heads)
        ]
        mixed = ad.matmul(ad.concat_cols(head_outs), self.w_mix)
        if z.cols == self.hidden:
            mixed = ad.add(mixed, z)
        normed = ad.layer_norm(mixed, self.ln_gain, self.ln_shift)
        ff = ad.matmul(ad.relu(ad.matmul(normed, self.w_ff_in)), self.w_ff_out)
        return ad.add(ff, mixed)

    def parameters(self) -> list[Tensor]:
        return (
            self.w_q + self.w_k + self.w_v
            + [self.w_mix, self.ln_gain, self.ln_shift, self.w_ff_in, self.w_ff_out]
        )


class ClassifierHead:
    """Linear map to class logits followed by a row softmax."""

    def __init__(self, in_dim: int, n_classes: int, rng: np.random.Generator):
        self.w_cls = ad.uniform_parameter(in_dim, n_classes, rng)
        self.n_classes = n_classes

    def __call__(self, z: Tensor) -> Tensor:
        return ad.row_softmax(ad.matmul(z, self.w_cls))

    def parameters(self) -> list[Tensor]:
        return [self.w_cls]


def cross_entropy(probs: Tensor, labels: np.ndarray, node_idx: np.ndarray) -> Tensor:
    """Summed negative log-likelihood of the true classes over node_idx.

    Probabilities are clamped inside the log so a confidently wrong row
    yields a large but finite loss.
    """
    node_idx = np.asarray(node_idx)
    if node_idx.size == 0:
        raise ValueError("cross_entropy: empty node index set")
    onehot = np.zeros(probs.shape)
    onehot[node_idx, np.asarray(labels)[node_idx]] = 1.0
    picked = ad.mul(ad.log(probs), ad.constant(onehot))
    return ad.scale(ad.sum_all(picked), -1.0)
