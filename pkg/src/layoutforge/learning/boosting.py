"""Smooth boosting over axis-aligned decision stumps.

Per-sample weights stay capped at 1, ``M(j) = min(1, (1 - gamma)^(N(j) / 2))``,
where ``N(j)`` accumulates the margin ``y_j h_t(x_j) - theta`` over rounds.
A stump is kept only if its weighted error is at most ``1/2 - gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int = 1

    def predict(self, x) -> np.ndarray:
        """+polarity where x[feature] > threshold, else -polarity."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.where(x[:, self.feature] > self.threshold, self.polarity, -self.polarity).astype(np.int64)


@dataclass
class StumpEnsemble:
    gamma: float
    theta: float
    stumps: list[Stump] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)  # M_t before round t
    margins: Optional[np.ndarray] = None                      # N_t after the last round
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.stumps)


def _signed(labels) -> np.ndarray:
    # {0, 1} and {-1, +1} both map onto {-1, +1}
    return np.where(np.asarray(labels).ravel() > 0, 1, -1)


def weak_learner_margin(h: Stump, weights, x, labels, gamma: float) -> tuple[float, bool]:
    """Half the weighted L1 distance between stump and labels, and whether it passes.

    Labels are mapped to +-1 so the value equals the weighted error of ``h``
    with weights normalised to sum 1.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    y = _signed(labels)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not len(w) == len(y) == len(x):
        raise ValueError("weights, samples and labels must have equal length")
    if (w <= 0).any() or (w > 1).any():
        raise ValueError("weights must lie in (0, 1]")
    lhs = 0.5 * float(np.sum(w / w.sum() * np.abs(h.predict(x) - y)))
    return lhs, lhs <= 0.5 - gamma


def best_stump(x, labels, weights) -> tuple[Stump, float]:
    """Lowest weighted-error stump over all features, thresholds and polarities."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = _signed(labels)
    d = np.asarray(weights, dtype=np.float64).ravel()
    d = d / d.sum()
    best, best_err = None, np.inf
    for f in range(x.shape[1]):
        order = np.argsort(x[:, f], kind="stable")
        v, yy, dd = x[order, f], y[order], d[order]
        cp = np.cumsum(np.where(yy > 0, dd, 0.0))
        cn = np.cumsum(np.where(yy < 0, dd, 0.0))
        # split k: samples 0..k predicted -1 (polarity +1); k = -1 means none
        err = np.r_[cn[-1], cp + (cn[-1] - cn)]
        cut = np.r_[True, v[:-1] < v[1:], False]
        thr = np.r_[-np.inf, (v[:-1] + v[1:]) / 2.0, np.inf]
        for pol, e in ((1, err), (-1, 1.0 - err)):
            e = np.where(cut, e, np.inf)
            k = int(np.argmin(e))
            if e[k] < best_err - 1e-15:
                best, best_err = Stump(f, float(thr[k]), pol), float(e[k])
    return best, best_err


def train_smoothboost(x, labels, gamma: float, rounds: int, theta: Optional[float] = None) -> StumpEnsemble:
    """Run up to ``rounds`` boosting rounds; stop early when no stump passes."""
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must be in (0, 1/2)")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = _signed(labels)
    if theta is None:
        theta = gamma / (2.0 + gamma)
    ens = StumpEnsemble(gamma, theta)
    n_margin = np.zeros(len(y))
    m = np.ones(len(y))
    for _ in range(rounds):
        h, _err = best_stump(x, y, m)
        _lhs, ok = weak_learner_margin(h, m, x, y, gamma)
        if not ok:
            ens.stopped_early = True
            break
        ens.weights.append(m.copy())
        ens.stumps.append(h)
        n_margin = n_margin + y * h.predict(x) - theta
        m = np.clip((1.0 - gamma) ** (n_margin / 2.0), _TINY, 1.0)
    ens.margins = n_margin
    ens.weights.append(m)
    return ens


def ensemble_predict(ens: StumpEnsemble, x) -> np.ndarray:
    """Sign of the mean stump vote; ties go to +1."""
    if not ens.stumps:
        raise ValueError("ensemble is empty")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    votes = np.mean([h.predict(x) for h in ens.stumps], axis=0)
    return np.where(votes >= 0, 1, -1)
