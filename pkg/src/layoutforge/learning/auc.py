"""AUC as the Wilcoxon-Mann-Whitney statistic; ties count one half."""

from __future__ import annotations

import numpy as np


def _check(pos, neg):
    pos = np.asarray(pos, dtype=np.float64).ravel()
    neg = np.asarray(neg, dtype=np.float64).ravel()
    if not len(pos) or not len(neg):
        raise ValueError("AUC needs at least one positive and one negative score")
    return pos, neg


def auc_bruteforce(pos, neg) -> float:
    """Average of step(s+ - s-) over every between-class pair; O(N+ N-)."""
    pos, neg = _check(pos, neg)
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return wins / (len(pos) * len(neg))


def auc_fast(pos, neg) -> float:
    """Same statistic in O(N log N) via sorted negatives."""
    pos, neg = _check(pos, neg)
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    wins = below.sum() + 0.5 * (upto - below).sum()
    return wins / (len(pos) * len(neg))
