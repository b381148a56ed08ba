"""Stochastic blurring mean shift with a fresh random partition at every iteration.

Each member is updated against the members of its own subset only, which
brings the cost of one sweep from ``O(n^2)`` down to ``O(n * subset_size)``.
All subsets are updated synchronously from the same previous state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _engine
from .exceptions import InvalidPartition
from .fspace import FunctionSample, FunctionSet, l2_dist, l2_norm
from .full import IterationRecord, RunTrace, ms_operator, surrogate_density
from .kernel import BandwidthSchedule, KernelConfig

__all__ = [
    "PartitionPlan",
    "StochasticConfig",
    "make_partition",
    "subset_ms_operator",
    "subset_density",
    "run_stochastic",
    "one_step_approximation_experiment",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Assignment of member indices to ``m`` disjoint subsets for iteration ``nu``."""

    nu: int
    assignment: np.ndarray
    subset_sizes: np.ndarray

    @property
    def m(self) -> int:
        return len(self.subset_sizes)

    def members(self, k: int) -> np.ndarray:
        """Indices in subset ``k``, ascending."""
        return np.flatnonzero(self.assignment == k)

    def groups(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        return np.split(order, np.cumsum(self.subset_sizes)[:-1])


@dataclass(frozen=True)
class StochasticConfig:
    schedule: BandwidthSchedule
    epsilon: float = 1e-6
    max_iters: int = 500
    subset_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.subset_size < 1:
            raise ValueError("subset_size must be >= 1")

    def num_subsets(self, n: int) -> int:
        return max(1, int(np.floor(n / self.subset_size + 0.5)))


def _rng(seed: int, nu: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, int(nu)]))


def make_partition(n: int, m: int, nu: int, seed: int) -> PartitionPlan:
    """Balanced random partition: seeded shuffle of ``0..n-1`` cut into ``m`` contiguous chunks.

    The first ``n % m`` chunks get one extra member.  The shuffle is keyed
    by ``(seed, nu)`` so any iteration can be replayed on its own.
    """
    if n < 1:
        raise InvalidPartition("n must be positive")
    if not 1 <= m <= n:
        raise InvalidPartition(f"need 1 <= m <= n, got m={m}, n={n}")
    perm = _rng(seed, nu).permutation(n)
    q, r = divmod(n, m)
    sizes = np.full(m, q, dtype=np.intp)
    sizes[:r] += 1
    assignment = np.empty(n, dtype=np.intp)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    for k in range(m):
        assignment[perm[bounds[k]:bounds[k + 1]]] = k
    return PartitionPlan(nu, assignment, sizes)


def _check_plan(state: FunctionSet, plan: PartitionPlan) -> None:
    if plan.assignment.shape[0] != state.n:
        raise InvalidPartition(
            f"plan covers {plan.assignment.shape[0]} members, state has {state.n}")


def subset_ms_operator(i: int, state: FunctionSet, plan: PartitionPlan,
                       cfg: KernelConfig) -> FunctionSample:
    _check_plan(state, plan)
    sub = state.subset(plan.members(plan.assignment[i]))
    return ms_operator(state[i], sub, cfg)


def subset_density(i: int, state: FunctionSet, plan: PartitionPlan, cfg: KernelConfig) -> float:
    """Surrogate density at member ``i`` normalized by its subset size."""
    _check_plan(state, plan)
    sub = state.subset(plan.members(plan.assignment[i]))
    return surrogate_density(state[i], sub, cfg)


def _stochastic_update(values, grid, plan, cfg, ctx):
    new = np.empty_like(values)
    dens = np.empty(values.shape[0])
    groups = plan.groups()

    def work(idx):
        sub = values[idx]
        # a single subset is handed the worker pool so it still runs in parallel
        pool = ctx.pool if len(groups) == 1 else None
        return _engine.shift_rows(sub, sub, grid, cfg, pool)

    results = (ctx.pool.map(work, groups) if ctx.pool is not None and len(groups) > 1
               else map(work, groups))
    for idx, (num, mass) in zip(groups, results):
        new[idx] = num / mass[:, None]
        dens[idx] = mass / len(idx)
    return new, dens


def run_stochastic(init: FunctionSet, cfg: StochasticConfig, threads: int = 1) -> RunTrace:
    """Blurring iterations where each member only sees its own random subset.

    The recorded density is the subset-normalized surrogate density averaged
    over members.  Stops when the largest member shift is below epsilon.
    """
    n = init.n
    m = cfg.num_subsets(n)
    weights = init.grid.weights
    values = init.values
    trace = RunTrace()
    with _engine.StepContext(threads) as ctx:
        for nu in range(cfg.max_iters):
            kcfg = cfg.schedule.kernel(nu)
            plan = make_partition(n, m, nu, cfg.seed)
            new, dens = _stochastic_update(values, init.grid, plan, kcfg, ctx)
            shifts = _engine.member_shifts(new, values, weights)
            trace.records.append(IterationRecord(nu, kcfg.h, float(np.mean(dens)),
                                                 float(shifts.max()), float(shifts.mean()), m))
            values = new
            if shifts.max() < cfg.epsilon:
                trace.converged = True
                break
    trace.iters_used = len(trace.records)
    trace.final = init.with_values(values)
    trace.isolated = np.zeros(n, dtype=bool)
    if not trace.converged:
        log.warning("no convergence after %d iterations (last max shift %.3g)",
                    trace.iters_used, trace.records[-1].max_shift)
    return trace


def one_step_approximation_experiment(data: FunctionSet, f_index: int, subset_sizes,
                                      reps: int, cfg: KernelConfig, seed: int = 0,
                                      threads: int = 1) -> list[dict]:
    """Distance between the subset-based and full mean shift images of one member.

    For each size, ``reps`` uniform subsets that contain ``f_index`` are drawn
    and the L2 error against the full-data operator is summarized by its
    median and interquartile range.  All subsets are drawn up front from one
    generator, so the table does not depend on ``threads``.
    """
    n = data.n
    norms = np.array([l2_norm(g, data.grid) for g in data])
    if not np.all(np.isfinite(norms)):
        raise ValueError("data norms must be finite")
    for size in subset_sizes:
        if not 1 <= size <= n:
            raise ValueError(f"subset size {size} outside [1, {n}]")
    f = data[f_index]
    full = ms_operator(f, data, cfg)
    others = np.delete(np.arange(n), f_index)
    rng = np.random.default_rng(seed)
    draws = [[np.sort(np.concatenate([[f_index], rng.choice(others, size - 1, replace=False)]))
              for _ in range(reps)] for size in subset_sizes]

    def err(idx):
        return l2_dist(ms_operator(f, data.subset(idx), cfg), full, data.grid)

    rows = []
    with _engine.StepContext(threads) as ctx:
        for size, idxs in zip(subset_sizes, draws):
            errs = np.array(list(ctx.pool.map(err, idxs)) if ctx.pool else [err(i) for i in idxs])
            q25, med, q75 = np.percentile(errs, [25, 50, 75])
            rows.append({"subset_size": int(size), "median_error": float(med),
                         "iqr": float(q75 - q25), "max_norm": float(norms.max())})
    return rows
