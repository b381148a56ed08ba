"""Full-data functional mean shift: operator, surrogate densities and iteration loops."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import _engine
from .exceptions import GridMismatch
from .fspace import FunctionSample, FunctionSet, _as_values
from .kernel import BandwidthSchedule, KernelConfig, kernel_values

__all__ = [
    "RunConfig",
    "IterationRecord",
    "RunTrace",
    "ms_operator",
    "surrogate_density",
    "average_density",
    "bfms_step",
    "nbfms_step",
    "run_full",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    schedule: BandwidthSchedule
    epsilon: float = 1e-6
    max_iters: int = 500
    mode: str = "blurring"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.mode not in ("blurring", "non_blurring"):
            raise ValueError(f"mode must be 'blurring' or 'non_blurring', got {self.mode!r}")


@dataclass(frozen=True)
class IterationRecord:
    """One iteration: density of the state entering it, and how far members moved."""

    nu: int
    h: float
    avg_density: float
    max_shift: float
    mean_shift: float
    m: int = 1


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    final: FunctionSet | None = None
    converged: bool = False
    iters_used: int = 0
    isolated: np.ndarray | None = None

    @property
    def avg_density(self) -> np.ndarray:
        return np.array([r.avg_density for r in self.records])

    @property
    def max_shift(self) -> np.ndarray:
        return np.array([r.max_shift for r in self.records])

    def to_csv(self, path, include_m: bool = False) -> None:
        cols = ["nu", "h", "avg_density", "max_shift", "mean_shift"] + (["m"] if include_m else [])
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.records:
                row = [r.nu, repr(r.h), repr(r.avg_density), repr(r.max_shift), repr(r.mean_shift)]
                if include_m:
                    row.append(r.m)
                w.writerow(row)


def _dists_to(f: np.ndarray, data: FunctionSet) -> np.ndarray:
    diff = data.values - f
    return np.sqrt(np.einsum("ij,ij,j->i", diff, diff, data.grid.weights))


def _kernel_of_dists(d: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    return kernel_values(d * d, cfg)


def ms_operator(f, data: FunctionSet, cfg: KernelConfig) -> FunctionSample:
    """Kernel-weighted average of ``data`` seen from ``f``.

    If no member lies within ``tau`` of ``f`` the input is returned unchanged
    with ``isolated=True``.
    """
    fv = _as_values(f, data.grid)
    fid = f.id if isinstance(f, FunctionSample) else None
    w = _kernel_of_dists(_dists_to(fv, data), cfg)
    total = w.sum()
    if total <= 0:
        return FunctionSample(fid, fv, isolated=True)
    return FunctionSample(fid, (w / total) @ data.values)


def surrogate_density(f, data: FunctionSet, cfg: KernelConfig) -> float:
    fv = _as_values(f, data.grid)
    return float(_kernel_of_dists(_dists_to(fv, data), cfg).sum() / data.n)


def average_density(data: FunctionSet, cfg: KernelConfig) -> float:
    """Mean over members of the surrogate density at each member (self terms included)."""
    X = data.scaled()
    X = X - X.mean(axis=0)
    D2 = cdist(X, X, "sqeuclidean")
    return float(kernel_values(D2, cfg).sum(axis=1).mean() / data.n)


def _full_update(values, grid, cfg, ctx):
    """One synchronous blurring update of every row; returns new values and per-row density."""
    num, mass = _engine.shift_rows(values, values, grid, cfg, ctx.pool)
    return num / mass[:, None], mass / values.shape[0]


def _nonblurring_update(q_values, d_values, grid, cfg, ctx):
    num, mass = _engine.shift_rows(q_values, d_values, grid, cfg, ctx.pool)
    isolated = mass <= 0
    new = q_values.copy()
    ok = ~isolated
    new[ok] = num[ok] / mass[ok, None]
    return new, mass / d_values.shape[0], isolated


def bfms_step(state: FunctionSet, cfg: KernelConfig, threads: int = 1) -> FunctionSet:
    """Move every member to its mean shift image computed from the *same* input state."""
    with _engine.StepContext(threads) as ctx:
        new, _ = _full_update(state.values, state.grid, cfg, ctx)
    return state.with_values(new)


def nbfms_step(queries: FunctionSet, data: FunctionSet, cfg: KernelConfig, threads: int = 1,
               return_isolated: bool = False):
    """Move each query against the fixed ``data``; isolated queries stay put."""
    if queries.grid != data.grid:
        raise GridMismatch(f"{queries.grid} != {data.grid}")
    with _engine.StepContext(threads) as ctx:
        new, _, isolated = _nonblurring_update(queries.values, data.values, data.grid, cfg, ctx)
    out = queries.with_values(new)
    return (out, isolated) if return_isolated else out


def run_full(init: FunctionSet, run_cfg: RunConfig, threads: int = 1) -> RunTrace:
    """Iterate the full-data update until the largest member shift drops below epsilon.

    The bandwidth at iteration ``nu`` comes from the schedule.  Hitting
    ``max_iters`` is reported through ``converged=False``, never raised.
    """
    weights = init.grid.weights
    values = init.values
    data_values = init.values
    trace = RunTrace()
    isolated = np.zeros(init.n, dtype=bool)
    with _engine.StepContext(threads) as ctx:
        for nu in range(run_cfg.max_iters):
            cfg = run_cfg.schedule.kernel(nu)
            if run_cfg.mode == "blurring":
                new, dens = _full_update(values, init.grid, cfg, ctx)
            else:
                new, dens, isolated = _nonblurring_update(values, data_values, init.grid, cfg, ctx)
            shifts = _engine.member_shifts(new, values, weights)
            trace.records.append(IterationRecord(nu, cfg.h, float(np.mean(dens)),
                                                 float(shifts.max()), float(shifts.mean())))
            values = new
            if shifts.max() < run_cfg.epsilon:
                trace.converged = True
                break
    trace.iters_used = len(trace.records)
    trace.final = init.with_values(values)
    trace.isolated = isolated
    if not trace.converged:
        log.warning("no convergence after %d iterations (last max shift %.3g)",
                    trace.iters_used, trace.records[-1].max_shift)
    return trace
