"""Batch-biased labels: non-hotspot targets relaxed as their loss grows."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BiasConfig:
    eps_max: float = 0.3
    scale: float = math.log(2.0)

    def __post_init__(self):
        if not 0.0 < self.eps_max < 0.5:
            raise ValueError("eps_max must be in (0, 0.5)")
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")


def bbl_epsilon(l: float, cfg: BiasConfig = BiasConfig()) -> float:
    if l < 0 or math.isnan(l):
        raise ValueError("average loss must be >= 0")
    return cfg.eps_max * -math.expm1(-l / cfg.scale)


def bbl_bias(l: float, cfg: BiasConfig = BiasConfig()) -> tuple[float, float]:
    """Biased one-hot target ``[1 - eps, eps]`` for a non-hotspot sample."""
    eps = bbl_epsilon(l, cfg)
    return 1.0 - eps, eps
