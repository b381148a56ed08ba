"""Truncated Gaussian kernel, bandwidth schedule and influence-range estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import InsufficientData
from .fspace import FunctionSet

__all__ = [
    "KernelConfig",
    "BandwidthSchedule",
    "kernel_eval",
    "kernel_values",
    "schedule_bandwidth",
    "estimate_tau",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth ``h`` and compact-support radius ``tau`` (same units as the L2 distance)."""

    h: float
    tau: float

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"h must be positive and finite, got {self.h}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class BandwidthSchedule:
    """Iteration-indexed bandwidth.

    ``rule="paper_linear"`` grows linearly, ``h = tau / (100 sqrt 2) * (5 + 2 nu)``;
    ``rule="constant"`` always returns ``h0``.
    """

    tau: float
    rule: str = "paper_linear"
    h0: float | None = None

    def __post_init__(self):
        if self.rule not in ("paper_linear", "constant"):
            raise ValueError(f"unknown schedule rule {self.rule!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.rule == "constant" and not (self.h0 is not None and self.h0 > 0):
            raise ValueError("constant schedule needs a positive h0")

    @classmethod
    def constant(cls, h0: float, tau: float) -> "BandwidthSchedule":
        return cls(tau=tau, rule="constant", h0=h0)

    def kernel(self, nu: int) -> KernelConfig:
        return KernelConfig(schedule_bandwidth(nu, self), self.tau)


def kernel_eval(t: float, cfg: KernelConfig) -> float:
    """``exp(-t^2 / 2h^2) / (sqrt(2 pi) h)`` for ``t <= tau``, zero beyond."""
    if t > cfg.tau:
        return 0.0
    return _INV_SQRT_2PI / cfg.h * math.exp(-0.5 * (t / cfg.h) ** 2)


def kernel_values(sq_dist: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Vectorized kernel evaluated from *squared* distances.

    Working on squared distances avoids a square root per pair; the support
    test ``d <= tau`` becomes ``d^2 <= tau^2``.
    """
    K = np.exp(sq_dist * (-0.5 / cfg.h ** 2))
    K *= _INV_SQRT_2PI / cfg.h
    K[sq_dist > cfg.tau ** 2] = 0.0
    return K


def schedule_bandwidth(nu: int, sched: BandwidthSchedule) -> float:
    if nu < 0:
        raise ValueError("iteration index must be nonnegative")
    if sched.rule == "constant":
        return float(sched.h0)
    return sched.tau / (100.0 * math.sqrt(2.0)) * (5 + 2 * nu)


def estimate_tau(data: FunctionSet, sample_size: int = 5000, percentile: float = 20.0,
                 seed: int = 0) -> float:
    """Percentile of pairwise L2 distances over a seeded random subsample.

    Draws ``min(sample_size, n)`` members without replacement and returns the
    requested percentile (linear interpolation between order statistics).
    """
    if data.n < 2:
        raise InsufficientData("need at least two members to estimate tau")
    if sample_size < 2:
        raise ValueError("sample_size must be at least 2")
    if not 0 < percentile < 100:
        raise ValueError("percentile must lie in (0, 100)")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(data.n, size=min(sample_size, data.n), replace=False))
    d = pdist(data.scaled()[idx])
    return float(np.percentile(d, percentile, method="linear"))
