"""AdaDelta optimization, the epoch loop, metrics, and grid search.

The optimizer follows Zeiler's published update exactly (rho 0.95,
epsilon 1e-6): decaying averages of squared gradients and squared updates
set a per-entry step size with no learning rate. Training is fully
deterministic for a fixed seed: batch composition derives from the seed
and epoch index, and all parameters live in one ordered registry.

Chunk F1 follows the shared-task convention: a span starts at B-X, or at
an I-X that does not continue a running X span (stray I-X opens a span),
and runs through following I-X tags. Zero spans on both sides count as
F1 = 1.0; zero predicted spans against a non-empty gold set count as 0.0.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError, Tensor
from .data import Batch, LabeledExample, make_batches
from .model import Cn3Model

RHO_DEFAULT = 0.95
EPS_DEFAULT = 1e-6


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; the model was reset to the last good state."""


@dataclass
class AdaDeltaState:
    """Decaying accumulators, one pair per parameter, keyed by name."""

    rho: float = RHO_DEFAULT
    eps: float = EPS_DEFAULT
    sq_grad: dict[str, np.ndarray] = field(default_factory=dict)
    sq_update: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Sequence[tuple[str, Tensor]],
                   rho: float = RHO_DEFAULT, eps: float = EPS_DEFAULT,
                   ) -> "AdaDeltaState":
        state = cls(rho=rho, eps=eps)
        for name, t in params:
            state.sq_grad[name] = np.zeros_like(t.data)
            state.sq_update[name] = np.zeros_like(t.data)
        return state


def global_grad_norm(params: Sequence[tuple[str, Tensor]]) -> float:
    total = 0.0
    for _, t in params:
        if t.grad is not None:
            total += float((t.grad * t.grad).sum())
    return math.sqrt(total)


def adadelta_step(params: Sequence[tuple[str, Tensor]], state: AdaDeltaState,
                  clip_norm: float | None = None) -> None:
    """Apply one update in place; a missing gradient counts as zero."""
    for name, t in params:
        if t.grad is not None and not np.all(np.isfinite(t.grad)):
            raise NumericError(f"non-finite gradient in parameter {name!r}")
        if state.sq_grad[name].shape != t.data.shape:
            raise ad.ShapeError(f"optimizer state shape mismatch for {name!r}")
    scale = 1.0
    if clip_norm is not None:
        norm = global_grad_norm(params)
        if norm > clip_norm:
            scale = clip_norm / norm
    rho, eps = state.rho, state.eps
    for name, t in params:
        g = np.zeros_like(t.data) if t.grad is None else t.grad * scale
        eg = state.sq_grad[name]
        ex = state.sq_update[name]
        eg *= rho
        eg += (1.0 - rho) * g * g
        delta = -np.sqrt(ex + eps) / np.sqrt(eg + eps) * g
        ex *= rho
        ex += (1.0 - rho) * delta * delta
        t.data += delta


# ---------------------------------------------------------------------------
# metrics

def extract_chunks(tags: Sequence[str]) -> set[tuple[str, int, int]]:
    """Spans (type, start, end-exclusive) under the shared-task reading."""
    chunks: set[tuple[str, int, int]] = set()
    start, kind = None, None
    for i, tag in enumerate(tags):
        if tag.startswith("B-") or (tag.startswith("I-") and tag[2:] != kind):
            if start is not None:
                chunks.add((kind, start, i))
            start, kind = i, tag[2:]
        elif tag.startswith("I-") and tag[2:] == kind and start is not None:
            continue
        else:
            if start is not None:
                chunks.add((kind, start, i))
            start, kind = None, None
    if start is not None:
        chunks.add((kind, start, len(tags)))
    return chunks


def chunk_f1(gold_seqs: Sequence[Sequence[str]],
             pred_seqs: Sequence[Sequence[str]]) -> float:
    """Micro span F1 over the whole corpus."""
    if len(gold_seqs) != len(pred_seqs):
        raise ValueError("gold and prediction counts differ")
    n_gold = n_pred = n_correct = 0
    for gold, pred in zip(gold_seqs, pred_seqs):
        if len(gold) != len(pred):
            raise ValueError("gold and prediction lengths differ")
        g, p = extract_chunks(gold), extract_chunks(pred)
        n_gold += len(g)
        n_pred += len(p)
        n_correct += len(g & p)
    if n_gold == 0 and n_pred == 0:
        return 1.0
    if n_correct == 0:
        return 0.0
    precision = n_correct / n_pred
    recall = n_correct / n_gold
    return 2 * precision * recall / (precision + recall)


def token_accuracy(gold_seqs: Sequence[Sequence[str]],
                   pred_seqs: Sequence[Sequence[str]]) -> float:
    correct = total = 0
    for gold, pred in zip(gold_seqs, pred_seqs):
        if len(gold) != len(pred):
            raise ValueError("gold and prediction lengths differ")
        correct += sum(g == p for g, p in zip(gold, pred))
        total += len(gold)
    if total == 0:
        raise ValueError("no tokens to score")
    return correct / total


def evaluate_classification(model: Cn3Model,
                            examples: Sequence[LabeledExample]) -> float:
    if not examples:
        raise ValueError("cannot evaluate on an empty data set")
    correct = sum(model.predict(ex) == ex.label for ex in examples)
    return correct / len(examples)


TAG_METRICS = ("token_accuracy", "chunk_f1")
METRICS = ("accuracy",) + TAG_METRICS


def evaluate_tagging(model: Cn3Model, examples: Sequence[LabeledExample],
                     metric: str = "token_accuracy") -> float:
    if metric not in TAG_METRICS:
        raise ValueError(f"unknown tag metric {metric!r}; pick from {TAG_METRICS}")
    if not examples:
        raise ValueError("cannot evaluate on an empty data set")
    golds = [ex.tags for ex in examples]
    preds = [model.predict(ex) for ex in examples]
    if metric == "token_accuracy":
        return token_accuracy(golds, preds)
    return chunk_f1(golds, preds)


def evaluate(model: Cn3Model, examples: Sequence[LabeledExample],
             metric: str = "accuracy") -> float:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; pick from {METRICS}")
    if metric == "accuracy":
        return evaluate_classification(model, examples)
    return evaluate_tagging(model, examples, metric)


# ---------------------------------------------------------------------------
# training loop

@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    patience: int = 0  # 0 means run every epoch
    seed: int = 0
    rho: float = RHO_DEFAULT
    eps: float = EPS_DEFAULT
    clip_norm: float | None = None
    metric: str = "accuracy"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ValueError("epochs and batch_size must be positive, "
                             "patience non-negative")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, "
                             f"got {self.metric!r}")


def _epoch_seed(seed: int, epoch: int) -> int:
    return (seed * 1_000_003 + epoch) % (2 ** 63)


def _batch_loss(model: Cn3Model, batch: Batch) -> Tensor:
    losses = [model.loss_for(ex) for ex in batch.examples]
    total = losses[0]
    for extra in losses[1:]:
        total = total + extra
    return ad.scale(total, 1.0 / len(losses))


def train(model: Cn3Model, train_data: Sequence[LabeledExample],
          cfg: TrainConfig,
          dev_data: Sequence[LabeledExample] | None = None,
          ) -> list[dict]:
    """Optimize in place; return one history record per completed epoch.

    With a dev set the best-scoring epoch's parameters win and patience
    counts non-improving epochs; without one the final parameters stand.
    On a non-finite loss the model is restored to the end of the last
    completed epoch and TrainingDiverged is raised.
    """
    if not train_data:
        raise ValueError("empty training set")
    params = model.params()
    state = AdaDeltaState.for_params(params, rho=cfg.rho, eps=cfg.eps)
    history: list[dict] = []
    best_metric = -math.inf
    best_snap = model.snapshot()
    last_good = model.snapshot()
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        started = time.monotonic()
        loss_sum = 0.0
        example_count = 0
        for batch in make_batches(train_data, cfg.batch_size,
                                  _epoch_seed(cfg.seed, epoch)):
            loss = _batch_loss(model, batch)
            if not np.isfinite(loss.data):
                model.restore(last_good)
                raise TrainingDiverged(
                    f"non-finite loss in epoch {epoch}; restored the "
                    f"last completed epoch's parameters")
            ad.zero_grads([t for _, t in params])
            ad.backward(loss)
            adadelta_step(params, state, clip_norm=cfg.clip_norm)
            loss_sum += float(loss.data) * len(batch.examples)
            example_count += len(batch.examples)
        record = {"epoch": epoch,
                  "train_loss": loss_sum / example_count,
                  "dev_metric": None,
                  "wall_time": time.monotonic() - started}
        last_good = model.snapshot()
        if dev_data is not None:
            metric = evaluate(model, dev_data, cfg.metric)
            record["dev_metric"] = metric
            if metric > best_metric:
                best_metric = metric
                best_snap = model.snapshot()
                bad_epochs = 0
            else:
                bad_epochs += 1
        history.append(record)
        if dev_data is not None and cfg.patience > 0 and bad_epochs >= cfg.patience:
            break
    if dev_data is not None:
        model.restore(best_snap)
    return history


# ---------------------------------------------------------------------------
# grid search

def grid_search(space: dict[str, list], budget: int,
                run_cell: Callable[[dict], float],
                ) -> tuple[dict, list[dict]]:
    """Sweep the Cartesian product of `space`, best metric first by order.

    run_cell receives one {hyperparameter: value} assignment and returns
    the dev metric for a model trained under it with a fixed seed. Cells
    are visited in deterministic order (sorted keys, candidate order as
    given) and truncated to `budget`. Returns the winning assignment and
    the full log, one row per visited cell.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not space:
        raise ValueError("empty search space")
    keys = sorted(space)
    cells = itertools.islice(itertools.product(*(space[k] for k in keys)),
                             budget)
    log: list[dict] = []
    best_cell: dict | None = None
    best_metric = -math.inf
    for combo in cells:
        cell = dict(zip(keys, combo))
        metric = run_cell(dict(cell))
        log.append({**cell, "metric": metric})
        if metric > best_metric:
            best_metric = metric
            best_cell = cell
    assert best_cell is not None
    return best_cell, log
