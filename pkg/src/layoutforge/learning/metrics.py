"""Hotspot accuracy, false alarm and run-to-run spread."""

from __future__ import annotations

import numpy as np


def evaluate(predictions, labels) -> tuple[float, float]:
    """(accuracy, false_alarm); anything > 0 counts as hotspot.

    accuracy = hotspots found / real hotspots,
    false_alarm = non-hotspots flagged / real non-hotspots.
    """
    pred = np.asarray(predictions).ravel() > 0
    real = np.asarray(labels).ravel() > 0
    if pred.shape != real.shape:
        raise ValueError("predictions and labels differ in length")
    n_hot = int(real.sum())
    n_cold = len(real) - n_hot
    if not n_hot or not n_cold:
        raise ValueError("need at least one hotspot and one non-hotspot label")
    return float((pred & real).sum() / n_hot), float((pred & ~real).sum() / n_cold)


def mean_variance(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=np.float64).ravel()
    if len(x) < 2:
        raise ValueError("variance needs at least two runs")
    return float(x.mean()), float(x.var(ddof=1))


def variance_report(runs) -> dict[str, tuple[float, float]]:
    """Mean and Bessel-corrected variance of each metric over runs of (acc, fa)."""
    runs = np.asarray(runs, dtype=np.float64)
    if runs.ndim != 2 or runs.shape[1] != 2:
        raise ValueError("runs must be a sequence of (accuracy, false_alarm)")
    return {"accuracy": mean_variance(runs[:, 0]), "false_alarm": mean_variance(runs[:, 1])}
