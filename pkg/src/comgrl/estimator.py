"""Scikit-learn style wrapper around the full training pipeline.

``ComGRLClassifier`` is a transductive semi-supervised node classifier:
``fit`` takes the node features together with the graph adjacency and a
label vector where ``-1`` marks unlabeled nodes, trains the two-stage
pipeline, and predicts labels for every node of the fitted graph.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array

from .graphs import Graph, GraphValidationError
from .training import TrainConfig, fit_model


class ComGRLClassifier(BaseEstimator, ClassifierMixin):
    """Semi-supervised node classifier over an attributed graph.

    Parameters mirror the training configuration; see ``TrainConfig``.
    ``validation_fraction`` of the labeled nodes per class is held out to
    pick the best epoch (0 keeps the final epoch).

    Examples
    --------
    >>> clf = ComGRLClassifier(t_pre=20, t_total=30, hop_radius=2)
    >>> clf.fit((features, adjacency), y)       # y: -1 marks unlabeled
    >>> labels = clf.predict()
    """

    def __init__(
        self,
        alpha: float = 1.0,
        tau: float = 1.0,
        hop_radius: int = 2,
        hidden: int = 128,
        heads: int = 8,
        n_layers: int = 2,
        t_pre: int = 100,
        t_total: int = 200,
        lr: float = 1e-3,
        dropout: float = 0.0,
        confidence_threshold: float = 0.8,
        sharpen_beta: float = 0.5,
        refresh_interval: int = 1,
        mix_beta_a: float = 1.0,
        weight_decay: float = 0.0,
        contrastive_log_variant: bool = False,
        attention_mode: str = "efficient",
        disable_lgcl: bool = False,
        disable_gmsa: bool = False,
        disable_pma: bool = False,
        validation_fraction: float = 0.1,
        random_state: int = 0,
    ):
        self.alpha = alpha
        self.tau = tau
        self.hop_radius = hop_radius
        self.hidden = hidden
        self.heads = heads
        self.n_layers = n_layers
        self.t_pre = t_pre
        self.t_total = t_total
        self.lr = lr
        self.dropout = dropout
        self.confidence_threshold = confidence_threshold
        self.sharpen_beta = sharpen_beta
        self.refresh_interval = refresh_interval
        self.mix_beta_a = mix_beta_a
        self.weight_decay = weight_decay
        self.contrastive_log_variant = contrastive_log_variant
        self.attention_mode = attention_mode
        self.disable_lgcl = disable_lgcl
        self.disable_gmsa = disable_gmsa
        self.disable_pma = disable_pma
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            alpha=self.alpha,
            tau=self.tau,
            hop_radius=self.hop_radius,
            sharpen_beta=self.sharpen_beta,
            confidence_threshold=self.confidence_threshold,
            t_pre=self.t_pre,
            t_total=self.t_total,
            lr=self.lr,
            dropout=self.dropout,
            hidden=self.hidden,
            heads=self.heads,
            n_layers=self.n_layers,
            seed=self.random_state,
            refresh_interval=self.refresh_interval,
            mix_beta_a=self.mix_beta_a,
            weight_decay=self.weight_decay,
            contrastive_log_variant=self.contrastive_log_variant,
            attention_mode=self.attention_mode,
            disable_lgcl=self.disable_lgcl,
            disable_gmsa=self.disable_gmsa,
            disable_pma=self.disable_pma,
        )

    def _build_graph(self, X, y) -> tuple[Graph, np.ndarray]:
        if isinstance(X, Graph):
            if y is not None:
                raise ValueError("pass labels inside the Graph or as y, not both")
            return X, np.arange(X.n_classes)
        if not (isinstance(X, (tuple, list)) and len(X) == 2):
            raise ValueError("X must be a Graph or a (features, adjacency) pair")
        features = check_array(X[0], dtype=np.float64)
        adjacency = check_array(X[1], dtype=np.float64)
        n = features.shape[0]
        if adjacency.shape != (n, n):
            raise ValueError(f"adjacency shape {adjacency.shape} for {n} nodes")
        if y is None:
            raise ValueError("y is required with a (features, adjacency) pair")
        y = np.asarray(y)
        if y.shape != (n,):
            raise ValueError(f"y shape {y.shape}, expected ({n},)")
        labeled = np.flatnonzero(y != -1)
        if labeled.size == 0:
            raise ValueError("y marks every node unlabeled")
        classes, encoded_labeled = np.unique(y[labeled], return_inverse=True)
        encoded = np.zeros(n, dtype=np.int64)
        encoded[labeled] = encoded_labeled

        rng = np.random.default_rng(self.random_state)
        train, val = [], []
        for c in range(len(classes)):
            members = rng.permutation(labeled[encoded[labeled] == c])
            n_val = min(int(round(self.validation_fraction * len(members))), len(members) - 1)
            val.extend(members[:n_val])
            train.extend(members[n_val:])
        graph = Graph(
            features, adjacency, encoded,
            np.sort(train), np.sort(val), np.array([], dtype=np.int64),
            n_classes=len(classes),
        )
        return graph, classes

    def fit(self, X, y=None):
        """Train on a Graph, or on (features, adjacency) with y (-1 = unlabeled)."""
        try:
            graph, classes = self._build_graph(X, y)
        except GraphValidationError as exc:
            raise ValueError(str(exc)) from exc
        model, report = fit_model(graph, self._config())
        self.classes_ = classes
        self.model_ = model
        self.report_ = report
        self.graph_ = graph
        self.n_features_in_ = graph.features.shape[1]
        _, probs = model.forward(graph.features, training=False)
        self.proba_ = probs.values
        return self

    def _check_fitted_input(self, X):
        if not hasattr(self, "proba_"):
            raise RuntimeError("fit must be called before predict")
        if X is None:
            return
        features = X.features if isinstance(X, Graph) else np.asarray(X[0])
        if features.shape != self.graph_.features.shape:
            raise ValueError(
                "this transductive classifier predicts for the fitted graph; "
                f"got features of shape {features.shape}, "
                f"fitted on {self.graph_.features.shape}"
            )

    def predict_proba(self, X=None) -> np.ndarray:
        """Class probabilities for every node of the fitted graph."""
        self._check_fitted_input(X)
        return self.proba_.copy()

    def predict(self, X=None) -> np.ndarray:
        self._check_fitted_input(X)
        return self.classes_[self.proba_.argmax(axis=1)]

    def score(self, X=None, y=None) -> float:
        """Accuracy over the labeled entries of y (-1 entries are skipped)."""
        if y is None:
            raise ValueError("score requires y")
        y = np.asarray(y)
        pred = self.predict(X)
        mask = y != -1
        if not mask.any():
            raise ValueError("y marks every node unlabeled")
        return float((pred[mask] == y[mask]).mean())
