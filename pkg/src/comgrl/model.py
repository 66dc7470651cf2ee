"""Full network assembly: encoder, attention stack, classifier, ablation switches."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .attention import AttentionLayer, ClassifierHead
from .encoder import ContrastiveEncoder


class ComGRLModel:
    """Encoder -> attention stack -> classifier, any stage optionally disabled.

    ``use_encoder=False`` feeds raw attributes straight into the attention
    stack (whose first layer then adapts the width, skipping its residual);
    ``use_attention=False`` sends the encoder output directly to the
    classifier. With both disabled the model is a softmax-linear classifier
    on raw attributes.
    """

    def __init__(
        self,
        in_dim: int,
        n_classes: int,
        rng: np.random.Generator,
        hidden: int = 128,
        heads: int = 8,
        n_layers: int = 2,
        dropout_rate: float = 0.0,
        use_encoder: bool = True,
        use_attention: bool = True,
        attention_mode: str = "efficient",
    ):
        self.encoder = (
            ContrastiveEncoder(in_dim, hidden, rng, dropout_rate) if use_encoder else None
        )
        width = hidden if use_encoder else in_dim
        self.layers = []
        if use_attention:
            for _ in range(n_layers):
                self.layers.append(AttentionLayer(width, hidden, heads, rng, attention_mode))
                width = hidden
        self.head = ClassifierHead(width, n_classes, rng)
        self.in_dim = in_dim
        self.hidden = hidden
        self.n_classes = n_classes

    def forward(
        self,
        features: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor | None, Tensor]:
        """Return (encoder embedding or None, class probabilities)."""
        x = ad.constant(features)
        embedding = None
        z = x
        if self.encoder is not None:
            embedding = self.encoder(x, training=training, rng=rng)
            z = embedding
        for layer in self.layers:
            z = layer(z)
        return embedding, self.head(z)

    def parameters(self) -> list[Tensor]:
        params = []
        if self.encoder is not None:
            params.extend(self.encoder.parameters())
        for layer in self.layers:
            params.extend(layer.parameters())
        params.extend(self.head.parameters())
        return params

    def state_arrays(self) -> list[np.ndarray]:
        return [p.values.copy() for p in self.parameters()]

    def load_state_arrays(self, arrays: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise ValueError(f"state has {len(arrays)} arrays, model has {len(params)}")
        for p, a in zip(params, arrays):
            p.values[...] = a
