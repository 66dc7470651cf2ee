"""Two-layer MLP encoder and the neighborhood-weighted contrastive loss.

The encoder maps raw node attributes into the shared hidden width. The
contrastive loss pulls hop-neighborhood pairs together in cosine space,
weighted by the normalized multi-hop adjacency coefficients.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LEAKY_SLOPE = 0.01


class ContrastiveEncoder:
    """X' = leaky_relu(leaky_relu(X W1) W2), with dropout after each activation."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 dropout_rate: float = 0.0):
        self.w1 = ad.uniform_parameter(in_dim, hidden, rng)
        self.w2 = ad.uniform_parameter(hidden, hidden, rng)
        self.dropout_rate = dropout_rate
        self.in_dim = in_dim
        self.hidden = hidden

    def __call__(self, x: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        h = ad.leaky_relu(ad.matmul(x, self.w1), LEAKY_SLOPE)
        h = ad.dropout(h, self.dropout_rate, rng, training) if training else h
        h = ad.leaky_relu(ad.matmul(h, self.w2), LEAKY_SLOPE)
        h = ad.dropout(h, self.dropout_rate, rng, training) if training else h
        return h

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.w2]


def contrastive_loss(embedding: Tensor, s_con: np.ndarray, tau: float,
                     log_variant: bool = False) -> Tensor:
    """Mean over nodes of the coefficient-weighted share of similarity mass.

    For node i the share is sum_j s_ij exp(sim_ij / tau) divided by
    sum_k exp(sim_ik / tau) over all k (self included); the loss is minus
    the mean share. ``log_variant`` takes the log of each share instead,
    the more common contrastive formulation.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    n = embedding.rows
    if s_con.shape != (n, n):
        raise ad.ShapeError(f"contrastive_loss: coefficients {s_con.shape} vs {n} nodes")
    sims = ad.cosine_rows(embedding, embedding)
    heated = ad.exp(ad.scale(sims, 1.0 / tau))
    numer = ad.row_sum(ad.mul(heated, ad.constant(s_con)))
    denom = ad.row_sum(heated)
    share = ad.div(numer, denom)
    if log_variant:
        share = ad.log(share)
    return ad.scale(ad.mean_all(share), -1.0)
