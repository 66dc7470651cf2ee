"""Two-stage training: pre-train for pseudo-labels, fine-tune with mixup.

The combined objective is the labeled cross-entropy plus alpha times the
neighborhood contrastive loss. Pre-training runs on the original data;
fine-tuning refreshes a mixup plan from the current classifier snapshot
every ``refresh_interval`` epochs and trains on the mixed features with
contrast coefficients recomputed from the rectified adjacency. The
checkpoint with the best validation accuracy is used for test reporting.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import autodiff as ad
from .attention import cross_entropy
from .encoder import contrastive_loss
from .graphs import Graph, contrast_coefficients, hop_mask, validate_graph
from .mixup import PseudoLabels, build_mixup_plan, candidate_set, verify_plan
from .model import ComGRLModel
from .optim import Adam

logger = logging.getLogger(__name__)

# Per-dataset settings: alpha, tau, hop radius, stage lengths, learning rate,
# dropout. Shared architecture: 8 heads, 2 attention layers, hidden width 128.
DATASET_DEFAULTS = {
    "cora": dict(alpha=1.0, tau=1.8, hop_radius=4, t_pre=300, t_total=500, lr=5e-4, dropout=0.4),
    "citeseer": dict(alpha=0.1, tau=0.7, hop_radius=4, t_pre=100, t_total=1000, lr=3e-4, dropout=0.4),
    "pubmed": dict(alpha=1.0, tau=1.0, hop_radius=4, t_pre=300, t_total=1000, lr=4e-4, dropout=0.4),
    "cs": dict(alpha=1.0, tau=1.8, hop_radius=4, t_pre=20, t_total=600, lr=2e-4, dropout=0.1),
    "physics": dict(alpha=2.0, tau=1.0, hop_radius=4, t_pre=300, t_total=1000, lr=4e-4, dropout=0.1),
    "corafull": dict(alpha=1.0, tau=2.2, hop_radius=3, t_pre=40, t_total=400, lr=4e-4, dropout=0.4),
}

VARIANTS = ("full", "no_lgcl", "no_gmsa", "no_pma", "mlp")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class TrainConfig:
    alpha: float = 1.0
    tau: float = 1.0
    hop_radius: int = 2
    sharpen_beta: float = 0.5
    confidence_threshold: float = 0.8
    t_pre: int = 100
    t_total: int = 200
    lr: float = 1e-3
    dropout: float = 0.0
    hidden: int = 128
    heads: int = 8
    n_layers: int = 2
    seed: int = 0
    refresh_interval: int = 1
    mix_beta_a: float = 1.0
    fixed_lam: float | None = None
    weight_decay: float = 0.0
    contrastive_log_variant: bool = False
    attention_mode: str = "efficient"
    disable_lgcl: bool = False
    disable_gmsa: bool = False
    disable_pma: bool = False

    def validate(self) -> None:
        if not 0 <= self.t_pre <= self.t_total:
            raise ValueError(f"need 0 <= t_pre <= t_total, got {self.t_pre}, {self.t_total}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.hop_radius < 1:
            raise ValueError(f"hop_radius must be >= 1, got {self.hop_radius}")
        if not 0 < self.sharpen_beta <= 1:
            raise ValueError(f"sharpen_beta must be in (0, 1], got {self.sharpen_beta}")
        if not 0 <= self.confidence_threshold <= 1:
            raise ValueError(f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.refresh_interval < 1:
            raise ValueError(f"refresh_interval must be >= 1, got {self.refresh_interval}")
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.mix_beta_a <= 0:
            raise ValueError(f"mix_beta_a must be positive, got {self.mix_beta_a}")
        if self.fixed_lam is not None and not 0 <= self.fixed_lam <= 1:
            raise ValueError(f"fixed_lam must be in [0, 1], got {self.fixed_lam}")
        if self.attention_mode not in ("efficient", "standard"):
            raise ValueError(f"unknown attention_mode {self.attention_mode!r}")

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        cfg = cls(**values)
        cfg.validate()
        return cfg


def variant_config(config: TrainConfig, variant: str) -> TrainConfig:
    """Derive an ablation (or plain-MLP baseline) configuration."""
    if variant == "full":
        return replace(config)
    if variant == "no_lgcl":
        return replace(config, disable_lgcl=True)
    if variant == "no_gmsa":
        return replace(config, disable_gmsa=True)
    if variant == "no_pma":
        return replace(config, disable_pma=True)
    if variant == "mlp":
        return replace(config, disable_gmsa=True, disable_pma=True, alpha=0.0)
    raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")


def total_loss(ce: ad.Tensor, con: ad.Tensor | None, alpha: float) -> ad.Tensor:
    """Weighted sum ce + alpha * con; just ce when no contrastive term."""
    if con is None or alpha == 0.0:
        return ce
    return ad.add(ce, ad.scale(con, alpha))


def _accuracy(probs: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    idx = np.asarray(idx)
    correct = (probs[idx].argmax(axis=1) == labels[idx]).sum()
    return 100.0 * float(correct) / len(idx)


def evaluate(model: ComGRLModel, graph: Graph, split_idx: np.ndarray) -> float:
    """Accuracy percentage of the model on the given node split, eval mode."""
    split_idx = np.asarray(split_idx)
    if split_idx.size == 0:
        raise ValueError("evaluate: empty split")
    _, probs = model.forward(graph.features, training=False)
    return _accuracy(probs.values, graph.labels, split_idx)


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "config", "seed", "dataset", "noise", "epochs",
        "best_epoch", "best_val_accuracy", "final_test_accuracy",
        "augmentation", "wall_time_sec",
    ],
    "properties": {
        "config": {"type": "object"},
        "seed": {"type": "integer"},
        "dataset": {
            "type": "object",
            "required": ["n_nodes", "n_edges", "n_classes"],
            "properties": {
                "n_nodes": {"type": "integer"},
                "n_edges": {"type": "integer"},
                "n_classes": {"type": "integer"},
            },
        },
        "noise": {
            "type": "object",
            "required": ["lnr", "gnr"],
            "properties": {"lnr": {"type": "number"}, "gnr": {"type": "number"}},
        },
        "epochs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["epoch", "train_loss", "ce_loss", "con_loss",
                             "train_accuracy", "val_accuracy", "val_loss"],
                "properties": {
                    "epoch": {"type": "integer"},
                    "train_loss": {"type": "number"},
                    "ce_loss": {"type": "number"},
                    "con_loss": {"type": "number"},
                    "train_accuracy": {"type": "number"},
                    "val_accuracy": {"type": ["number", "null"]},
                    "val_loss": {"type": ["number", "null"]},
                },
            },
        },
        "best_epoch": {"type": ["integer", "null"]},
        "best_val_accuracy": {"type": ["number", "null"]},
        "final_test_accuracy": {"type": ["number", "null"]},
        "augmentation": {
            "type": "object",
            "required": ["active", "refreshes", "skipped_refreshes"],
            "properties": {
                "active": {"type": "boolean"},
                "refreshes": {"type": "integer"},
                "skipped_refreshes": {"type": "integer"},
            },
        },
        "wall_time_sec": {"type": "number"},
    },
    "additionalProperties": False,
}


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, REPORT_SCHEMA)


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    dataset: dict
    noise: dict
    epochs: list[dict]
    best_epoch: int | None
    best_val_accuracy: float | None
    final_test_accuracy: float | None
    augmentation: dict
    wall_time_sec: float

    def to_dict(self) -> dict:
        return asdict(self)


class Trainer:
    """Mutable training state for one run; drives both stages."""

    def __init__(self, graph: Graph, config: TrainConfig,
                 plan_dump_dir: str | None = None, check_plans: bool = False):
        config.validate()
        validate_graph(graph)
        self.graph = graph
        self.config = config
        self.plan_dump_dir = plan_dump_dir
        self.check_plans = check_plans
        root = np.random.default_rng(config.seed)
        self.init_rng, self.dropout_rng, self.mix_rng = root.spawn(3)
        self.model = ComGRLModel(
            in_dim=graph.features.shape[1],
            n_classes=graph.n_classes,
            rng=self.init_rng,
            hidden=config.hidden,
            heads=config.heads,
            n_layers=config.n_layers,
            dropout_rate=config.dropout,
            use_encoder=not config.disable_lgcl,
            use_attention=not config.disable_gmsa,
            attention_mode=config.attention_mode,
        )
        self.optimizer = Adam(self.model.parameters(), config.lr,
                              weight_decay=config.weight_decay)
        self.use_contrast = (not config.disable_lgcl) and config.alpha > 0
        self.s_con_clean = (
            contrast_coefficients(graph.adjacency, config.hop_radius).s_con
            if self.use_contrast else None
        )
        self.use_mixup = not config.disable_pma
        if self.use_mixup:
            hop = hop_mask(graph.adjacency, config.hop_radius)
            self.candidates = candidate_set(hop, graph.train_idx)
        else:
            self.candidates = np.array([], dtype=np.int64)
        self.cur_features = graph.features
        self.cur_s_con = self.s_con_clean
        self.epoch_records: list[dict] = []
        self._eval_probs_cache: np.ndarray | None = None
        self.best_val = -np.inf
        self.best_val_loss = np.inf
        self.best_epoch: int | None = None
        self.best_state: list[np.ndarray] | None = None
        self.refreshes = 0
        self.skipped_refreshes = 0

    def snapshot_pseudo_labels(self) -> PseudoLabels:
        """Eval-mode classifier probabilities on the original data.

        Reuses the probabilities computed for the previous epoch's metrics
        when the parameters have not changed since.
        """
        if self._eval_probs_cache is None:
            _, probs = self.model.forward(self.graph.features, training=False)
            self._eval_probs_cache = probs.values
        return PseudoLabels(self._eval_probs_cache.copy(),
                            self.config.confidence_threshold)

    def pretrain(self) -> PseudoLabels:
        """First stage on the original data; returns the pseudo-label snapshot."""
        for epoch in range(self.config.t_pre):
            self._train_epoch(epoch)
        return self.snapshot_pseudo_labels()

    def finetune(self) -> None:
        """Second stage: refresh the mixup plan periodically and train on it."""
        cfg = self.config
        for epoch in range(cfg.t_pre, cfg.t_total):
            if self.use_mixup and (epoch - cfg.t_pre) % cfg.refresh_interval == 0:
                self._refresh_plan(epoch)
            self._train_epoch(epoch)

    def _refresh_plan(self, epoch: int) -> None:
        cfg = self.config
        pseudo = self.snapshot_pseudo_labels()
        plan = build_mixup_plan(
            self.graph.features, self.graph.adjacency, self.graph.labels,
            self.graph.train_idx, self.candidates, pseudo, self.graph.n_classes,
            cfg.sharpen_beta, self.mix_rng, cfg.mix_beta_a, cfg.fixed_lam,
        )
        self.refreshes += 1
        if plan is None:
            self.skipped_refreshes += 1
            self.cur_features = self.graph.features
            self.cur_s_con = self.s_con_clean
            logger.info("epoch %d: no eligible mixup pairs, training on original data", epoch)
            return
        self.cur_features = plan.mixed_features
        if self.use_contrast:
            self.cur_s_con = contrast_coefficients(plan.mixed_adjacency, cfg.hop_radius).s_con
        verdicts = None
        if self.check_plans or self.plan_dump_dir:
            verdicts = verify_plan(plan, self.graph.adjacency, self.graph.labels,
                                   self.graph.train_idx, pseudo, cfg.hop_radius)
        if self.check_plans and not all(v["ok"] for v in verdicts):
            raise AssertionError(f"mixup plan failed constraint checks at epoch {epoch}: {verdicts}")
        if self.plan_dump_dir:
            os.makedirs(self.plan_dump_dir, exist_ok=True)
            path = os.path.join(self.plan_dump_dir, f"mixup_plan_{epoch:05d}.json")
            with open(path, "w") as fh:
                json.dump({"epoch": epoch, "pairs": plan.describe(),
                           "verdicts": verdicts}, fh, indent=2)

    def _train_epoch(self, epoch: int) -> None:
        cfg = self.config
        self.optimizer.zero_grad()
        embedding, probs = self.model.forward(self.cur_features, training=True,
                                              rng=self.dropout_rng)
        ce = cross_entropy(probs, self.graph.labels, self.graph.train_idx)
        con = None
        if self.use_contrast:
            con = contrastive_loss(embedding, self.cur_s_con, cfg.tau,
                                   cfg.contrastive_log_variant)
        loss = total_loss(ce, con, cfg.alpha)
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise TrainingDiverged(
                f"non-finite loss {loss_value} at epoch {epoch} (seed {cfg.seed})"
            )
        loss.backward()
        self.optimizer.step()
        self._eval_probs_cache = None
        self._record_epoch(epoch, loss_value, ce.item(), con.item() if con else 0.0)

    def _record_epoch(self, epoch: int, train_loss: float, ce_value: float,
                      con_value: float) -> None:
        graph = self.graph
        _, probs = self.model.forward(graph.features, training=False)
        pv = probs.values
        self._eval_probs_cache = pv
        record = {
            "epoch": epoch,
            "train_loss": train_loss,
            "ce_loss": ce_value,
            "con_loss": con_value,
            "train_accuracy": _accuracy(pv, graph.labels, graph.train_idx),
            "val_accuracy": None,
            "val_loss": None,
        }
        if graph.val_idx.size:
            record["val_accuracy"] = _accuracy(pv, graph.labels, graph.val_idx)
            picked = pv[graph.val_idx, graph.labels[graph.val_idx]]
            record["val_loss"] = float(-np.log(np.maximum(picked, ad.LOG_FLOOR)).mean())
            # Accuracy ties go to the lower validation loss; tiny validation
            # sets otherwise pin the checkpoint on an early lucky epoch.
            better = record["val_accuracy"] > self.best_val or (
                record["val_accuracy"] == self.best_val
                and record["val_loss"] < self.best_val_loss
            )
            if better:
                self.best_val = record["val_accuracy"]
                self.best_val_loss = record["val_loss"]
                self.best_epoch = epoch
                self.best_state = self.model.state_arrays()
        self.epoch_records.append(record)


def fit_model(graph: Graph, config: TrainConfig, noise: dict | None = None,
              plan_dump_dir: str | None = None,
              check_plans: bool = False) -> tuple[ComGRLModel, ExperimentReport]:
    """Run both stages; return the best-validation model and its report."""
    start = time.perf_counter()
    trainer = Trainer(graph, config, plan_dump_dir=plan_dump_dir, check_plans=check_plans)
    trainer.pretrain()
    trainer.finetune()
    if trainer.best_state is not None:
        trainer.model.load_state_arrays(trainer.best_state)
    test_acc = (
        evaluate(trainer.model, graph, graph.test_idx) if graph.test_idx.size else None
    )
    report = ExperimentReport(
        config=asdict(config),
        seed=config.seed,
        dataset={"n_nodes": graph.n_nodes, "n_edges": graph.n_edges,
                 "n_classes": graph.n_classes},
        noise=dict(noise) if noise else {"lnr": 0.0, "gnr": 0.0},
        epochs=trainer.epoch_records,
        best_epoch=trainer.best_epoch,
        best_val_accuracy=None if trainer.best_epoch is None else trainer.best_val,
        final_test_accuracy=test_acc,
        augmentation={
            "active": trainer.use_mixup and trainer.refreshes > trainer.skipped_refreshes,
            "refreshes": trainer.refreshes,
            "skipped_refreshes": trainer.skipped_refreshes,
        },
        wall_time_sec=time.perf_counter() - start,
    )
    return trainer.model, report


def train(graph: Graph, config: TrainConfig, noise: dict | None = None,
          plan_dump_dir: str | None = None, check_plans: bool = False) -> ExperimentReport:
    """Run both stages and report; restores the best-validation checkpoint."""
    _, report = fit_model(graph, config, noise=noise, plan_dump_dir=plan_dump_dir,
                          check_plans=check_plans)
    return report


def aggregate_reports(reports: list[ExperimentReport | dict],
                      failed_seeds: list[int] | None = None) -> dict:
    """Mean and sample standard deviation of test accuracy across seeds."""
    dicts = [r.to_dict() if isinstance(r, ExperimentReport) else r for r in reports]
    accs = [r["final_test_accuracy"] for r in dicts if r["final_test_accuracy"] is not None]
    return {
        "seeds": [r["seed"] for r in dicts],
        "test_accuracies": accs,
        "mean_test_accuracy": float(np.mean(accs)) if accs else None,
        "std_test_accuracy": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
        "failed_seeds": list(failed_seeds or []),
    }
