"""Pairwise surrogate losses for AUC, as functions of the score margin z = f(x+) - f(x-)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class LossKind(str, Enum):
    PSL = "PSL"    # squared
    PHL = "PHL"    # hinge
    PLL = "PLL"    # logistic
    R = "R"
    PCL1 = "PCL1"  # cubic, steep near z = -1
    PCL2 = "PCL2"  # cubic hinge


@dataclass(frozen=True)
class SurrogateLoss:
    """A surrogate with its parameters.

    ``r_as_printed`` switches the R loss to the active region ``z > gamma``
    (for side-by-side plots); the default penalises ``z < gamma``, which
    makes the loss fall as the ranking margin grows like the others.
    """

    kind: LossKind
    beta: float = 3.0
    gamma: float = 0.7
    p: float = 2.0
    r_as_printed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.R:
            if not 0.0 < self.gamma < 1.0:
                raise ValueError("R loss needs 0 < gamma < 1")
            if not self.p > 1.0:
                raise ValueError("R loss needs p > 1")
            if self.r_as_printed and self.p != int(self.p):
                raise ValueError("the z > gamma R-loss branch is only real-valued for integer p")
        if self.kind is LossKind.PLL and not self.beta > 0:
            raise ValueError("PLL needs beta > 0")

    def __call__(self, z):
        return surrogate_value(self, z)

    def grad(self, z):
        return surrogate_grad(self, z)


ALL_LOSSES = tuple(LossKind)


def _r_active(loss: SurrogateLoss, z):
    return z > loss.gamma if loss.r_as_printed else z < loss.gamma


def surrogate_value(loss: SurrogateLoss, z):
    z = np.asarray(z, dtype=np.float64)
    k = loss.kind
    if k is LossKind.PSL:
        out = (1.0 - z) ** 2
    elif k is LossKind.PHL:
        out = np.maximum(1.0 - z, 0.0)
    elif k is LossKind.PLL:
        out = np.logaddexp(0.0, -loss.beta * z)
    elif k is LossKind.R:
        active = _r_active(loss, z)
        base = np.where(active, loss.gamma - z, 0.0)
        out = np.where(active, np.sign(base) ** loss.p * np.abs(base) ** loss.p, 0.0)
    elif k is LossKind.PCL1:
        out = np.maximum(8.0 - (1.0 + z) ** 3, 0.0)
    else:
        out = np.maximum((1.0 - z) ** 3, 0.0)
    return out if out.ndim else float(out)


def surrogate_grad(loss: SurrogateLoss, z):
    """dPhi/dz; zero at hinge kinks and at the R-loss boundary."""
    z = np.asarray(z, dtype=np.float64)
    k = loss.kind
    if k is LossKind.PSL:
        out = -2.0 * (1.0 - z)
    elif k is LossKind.PHL:
        out = np.where(z < 1.0, -1.0, 0.0)
    elif k is LossKind.PLL:
        # -beta * sigmoid(-beta z), written to avoid overflow
        out = -loss.beta * np.exp(-np.logaddexp(0.0, loss.beta * z))
    elif k is LossKind.R:
        active = _r_active(loss, z)
        base = np.where(active, loss.gamma - z, 0.0)
        mag = loss.p * np.abs(base) ** (loss.p - 1)
        # d/dz (g - z)^p = -p (g - z)^(p-1), sign-aware for the printed branch
        out = np.where(active, -mag * np.sign(base) ** (loss.p - 1) if loss.r_as_printed else -mag, 0.0)
    elif k is LossKind.PCL1:
        out = np.where(z < 1.0, -3.0 * (1.0 + z) ** 2, 0.0)
    else:
        out = np.where(z < 1.0, -3.0 * (1.0 - z) ** 2, 0.0)
    return out if out.ndim else float(out)
