"""Full-graph training loop with ambiguity tracking and contrast refreshes.

Each epoch: (1) an eval-mode forward feeds the prediction memory and the
accuracy bookkeeping; (2) on refresh epochs (past warmup, every
refresh_period) the ambiguity scores, ambiguous set, contrast pools, and
auxiliary positives are rebuilt from the current embeddings; (3) a
train-mode forward produces the loss, cross entropy plus the weighted
contrast term over the pools from the last refresh, followed by one Adam
step. The contrast term is identically zero before the first refresh, when
the ambiguous set is empty, or when loss_weight is 0, which makes those
configurations reproduce plain cross-entropy training bit for bit.

Randomness is split into independent init/dropout/contrast streams derived
from the config seed, so identical configs give identical histories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import (
    AmbiguityState,
    DisamConfig,
    ambiguity_scores,
    build_contrast_groups,
    jsd_contrast_loss,
    select_ambiguous,
    update_memory,
)
from .graph import Graph, SplitMasks
from .metrics import MetricsReport, accuracy, metrics_report
from .models import ModelParams, cross_entropy_loss, forward, init_model
from .optim import AdamState, adam_step
from .tensor import add, backward, scale

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "TrainHistory",
    "TrainingDiverged",
    "train",
    "evaluate",
]


@dataclass
class TrainConfig:
    backbone: str = "gcn"
    hidden_dim: int = 64
    num_layers: int = 2
    sgc_k: int | None = None
    dropout: float = 0.0
    lr: float = 1e-3
    weight_decay: float = 5e-4
    max_epochs: int = 8000
    patience: int = 200
    eval_every: int = 1
    seed: int = 0
    disam: DisamConfig = field(default_factory=DisamConfig)

    def validate(self) -> None:
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        self.disam.validate()


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss_ce: float
    loss_contrast: float
    loss_total: float
    train_acc: float
    val_acc: float
    num_ambiguous: int
    mean_ambiguity: float


@dataclass
class TrainHistory:
    records: list[EpochRecord]
    best_epoch: int
    best_val_acc: float


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


def train(
    cfg: TrainConfig, g: Graph, masks: SplitMasks, rng: np.random.Generator | None = None
) -> tuple[ModelParams, AmbiguityState, TrainHistory]:
    """Train a backbone on one graph; returns the best-validation snapshot.

    ``rng`` overrides the seed-derived init stream and is only meant for
    tests; normal callers rely on cfg.seed for full determinism.
    """
    cfg.validate()
    if masks.train.size == 0 or masks.val.size == 0:
        raise ValueError("train and val masks must be non-empty")
    dc = cfg.disam

    streams = np.random.SeedSequence(cfg.seed).spawn(3)
    init_rng = rng if rng is not None else np.random.default_rng(streams[0])
    dropout_rng = np.random.default_rng(streams[1])
    contrast_rng = np.random.default_rng(streams[2])

    params = init_model(
        cfg.backbone,
        g.num_features,
        g.num_classes,
        hidden_dim=cfg.hidden_dim,
        num_layers=cfg.num_layers,
        sgc_k=cfg.sgc_k,
        rng=init_rng,
    )
    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    state = AmbiguityState.create(g.num_nodes, g.num_classes)
    cache: dict = {}
    groups = None
    records: list[EpochRecord] = []
    best_val = -1.0
    best_epoch = -1
    best_snapshot = params.snapshot()
    stale = 0

    for epoch in range(cfg.max_epochs):
        eval_out = forward(params, g, cache=cache)
        update_memory(state, eval_out.class_probs, dc.memory_decay)
        preds = eval_out.class_probs.argmax(axis=1)
        train_acc = accuracy(preds, g.labels, masks.train)
        val_acc = accuracy(preds, g.labels, masks.val)

        if epoch % cfg.eval_every == 0:
            if val_acc > best_val:
                best_val = val_acc
                best_epoch = epoch
                best_snapshot = params.snapshot()
                stale = 0
            else:
                stale += 1
            if stale >= cfg.patience:
                break

        if epoch >= dc.warmup_epochs and epoch % dc.refresh_period == 0:
            state.scores = ambiguity_scores(state.memory)
            state.ambiguous = select_ambiguous(state.scores, dc.score_threshold)
            if dc.loss_weight > 0 and state.ambiguous.size:
                groups = build_contrast_groups(
                    eval_out.embeddings.values, g, state.ambiguous, dc, contrast_rng
                )
            else:
                groups = None

        train_out = forward(
            params, g, training=True, dropout_rate=cfg.dropout, rng=dropout_rng,
            cache=cache,
        )
        ce = cross_entropy_loss(train_out, g.labels, masks.train)
        if dc.loss_weight > 0 and groups is not None and len(groups):
            contrast = jsd_contrast_loss(
                train_out.embeddings, groups, normalized=dc.normalized_similarity
            )
            total = add(ce, scale(contrast, dc.loss_weight))
            contrast_val = contrast.item()
        else:
            contrast_val = 0.0
            total = ce
        total_val = total.item()
        if not math.isfinite(total_val):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch}: ce={ce.item()}, "
                f"contrast={contrast_val}, backbone={cfg.backbone}, lr={cfg.lr}"
            )

        params.zero_grads()
        backward(total)
        adam_step(opt, params.named_values(), params.named_grads())

        records.append(
            EpochRecord(
                epoch=epoch,
                loss_ce=ce.item(),
                loss_contrast=contrast_val,
                loss_total=total_val,
                train_acc=train_acc,
                val_acc=val_acc,
                num_ambiguous=int(state.ambiguous.size),
                mean_ambiguity=float(state.scores.mean()),
            )
        )
    else:
        # Ran to max_epochs: give the final update a chance at the best slot.
        final_out = forward(params, g, cache=cache)
        final_val = accuracy(final_out.class_probs.argmax(axis=1), g.labels, masks.val)
        if final_val > best_val:
            best_val = final_val
            best_epoch = cfg.max_epochs
            best_snapshot = params.snapshot()

    params.restore(best_snapshot)
    history = TrainHistory(records=records, best_epoch=best_epoch, best_val_acc=best_val)
    return params, state, history


def evaluate(
    params: ModelParams, g: Graph, masks: SplitMasks, which: str = "test"
) -> MetricsReport:
    """Metrics for one split using an eval-mode forward."""
    out = forward(params, g)
    return metrics_report(out.class_probs, g.labels, masks.mask(which), g.num_classes)
