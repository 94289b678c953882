"""Linear scoring model trained by stochastic pairwise surrogate-loss descent."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..rng import Prng, mulhi64
from .auc import auc_fast
from .losses import SurrogateLoss, surrogate_grad, surrogate_value


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64).ravel()
        self.bias = float(self.bias)
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    @classmethod
    def zeros(cls, dim: int) -> "LinearModel":
        return cls(np.zeros(dim), 0.0)

    def score(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def copy(self) -> "LinearModel":
        return LinearModel(self.weights.copy(), self.bias)


@dataclass
class ScoredDataset:
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        self.positives = np.atleast_2d(np.asarray(self.positives, dtype=np.float64))
        self.negatives = np.atleast_2d(np.asarray(self.negatives, dtype=np.float64))
        if not self.positives.size or not self.negatives.size:
            raise ValueError("both classes need at least one sample")
        if self.positives.shape[1] != self.negatives.shape[1]:
            raise ValueError("positive and negative feature widths differ")

    @classmethod
    def from_labels(cls, x, labels) -> "ScoredDataset":
        x = np.asarray(x, dtype=np.float64)
        pos = np.asarray(labels) > 0
        return cls(x[pos], x[~pos])

    @property
    def dim(self) -> int:
        return self.positives.shape[1]

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    decay: float = 0.65
    batch: int = 32
    decay_interval: int = 2000
    iterations: int = 1000
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if self.batch < 2 or self.batch % 2:
            raise ValueError("batch must be an even integer >= 2")
        if self.decay_interval < 1:
            raise ValueError("decay_interval must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)  # (iter, loss, auc, lr)

    def to_csv(self) -> str:
        lines = ["iter,loss,auc,lr"]
        lines += [f"{i},{loss:.10g},{auc:.10g},{lr:.10g}" for i, loss, auc, lr in self.rows]
        return "\n".join(lines) + "\n"


def pairwise_loss(model: LinearModel, loss: SurrogateLoss, data: ScoredDataset, chunk: int = 4096) -> float:
    """Mean surrogate over every (positive, negative) pair."""
    sp = model.score(data.positives)
    sn = model.score(data.negatives)
    total = 0.0
    for i in range(0, len(sp), chunk):
        z = sp[i:i + chunk, None] - sn[None, :]
        total += float(np.sum(surrogate_value(loss, z)))
    return total / (len(sp) * len(sn))


def pair_gradient(model: LinearModel, loss: SurrogateLoss, xp, xn) -> tuple[np.ndarray, float]:
    """Gradient of Phi(f(xp) - f(xn)) with respect to (weights, bias).

    The bias cancels in the margin, so its gradient is always zero.
    """
    xp = np.asarray(xp, dtype=np.float64)
    xn = np.asarray(xn, dtype=np.float64)
    z = float(model.score(xp) - model.score(xn))
    return surrogate_grad(loss, z) * (xp - xn), 0.0


def _draw(prng: Prng, n: int, size: int) -> np.ndarray:
    return mulhi64(prng.next_block(n), np.uint64(size)).astype(np.int64)


def train_pairwise(data: ScoredDataset, loss: SurrogateLoss, cfg: TrainConfig = TrainConfig(),
                   init: Optional[LinearModel] = None, log: Optional[TrainLog] = None) -> LinearModel:
    """Plain SGD on one random between-class pair per mini-batch.

    Each iteration draws m/2 positives and m/2 negatives with replacement,
    then one pair from that batch. The rate is multiplied by ``decay`` every
    ``decay_interval`` iterations.
    """
    model = init.copy() if init is not None else LinearModel.zeros(data.dim)
    prng = Prng(cfg.seed)
    half = cfg.batch // 2
    n_pos, n_neg = len(data.positives), len(data.negatives)
    lr = cfg.learning_rate
    for it in range(1, cfg.iterations + 1):
        bp = _draw(prng, half, n_pos)
        bn = _draw(prng, half, n_neg)
        i, j = _draw(prng, 2, half)
        gw, gb = pair_gradient(model, loss, data.positives[bp[i]], data.negatives[bn[j]])
        model.weights -= lr * gw
        model.bias -= lr * gb
        if log is not None and cfg.log_every and it % cfg.log_every == 0:
            auc = auc_fast(model.score(data.positives), model.score(data.negatives))
            log.rows.append((it, pairwise_loss(model, loss, data), auc, lr))
        if it % cfg.decay_interval == 0:
            lr *= cfg.decay
    if not np.isfinite(model.weights).all():
        raise FloatingPointError("training diverged")
    return model


def model_auc(model: LinearModel, data: ScoredDataset) -> float:
    return auc_fast(model.score(data.positives), model.score(data.negatives))
