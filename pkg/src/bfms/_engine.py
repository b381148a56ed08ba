"""Blocked, thread-parallel mean shift kernel shared by the full and stochastic loops.

Each query row scans the data rows in index order, computes the exact
quadrature distance from the difference vector, and accumulates the kernel
weight and weighted values of every member within ``tau`` sequentially.  A
row's result therefore depends only on the members inside its kernel support
and never on block boundaries, worker count, or members farther than ``tau``.
The compiled loop releases the GIL, so row blocks run in parallel threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np
from threadpoolctl import threadpool_limits

from .kernel import _INV_SQRT_2PI, KernelConfig

BLOCK_ROWS = 256


@numba.njit(nogil=True, cache=True)
def _shift_block(q, data, weights, tau2, expo, scale, out_num, out_mass):
    nq, p = q.shape
    nd = data.shape[0]
    for i in range(nq):
        for j in range(nd):
            d2 = 0.0
            for k in range(p):
                t = q[i, k] - data[j, k]
                d2 += weights[k] * (t * t)
                if d2 > tau2:
                    break
            if d2 > tau2:
                continue
            kv = math.exp(d2 * expo) * scale
            out_mass[i] += kv
            for k in range(p):
                out_num[i, k] += kv * data[j, k]


def shift_rows(q_values, d_values, grid, cfg: KernelConfig, pool=None):
    """Kernel-weighted numerators and masses for every query row.

    Returns ``(numerator, mass)`` with ``numerator[i] = sum_j K_ij f_j`` and
    ``mass[i] = sum_j K_ij``, both summed over in-support ``j`` in index order.
    """
    q = np.ascontiguousarray(q_values, dtype=np.float64)
    d = np.ascontiguousarray(d_values, dtype=np.float64)
    w = np.ascontiguousarray(grid.weights, dtype=np.float64)
    nq = q.shape[0]
    num = np.zeros_like(q)
    mass = np.zeros(nq)
    # same expression as kernel_values, so both paths agree to the bit
    tau2 = cfg.tau ** 2
    expo = -0.5 / cfg.h ** 2
    scale = _INV_SQRT_2PI / cfg.h

    def work(s):
        e = min(s + BLOCK_ROWS, nq)
        _shift_block(q[s:e], d, w, tau2, expo, scale, num[s:e], mass[s:e])

    starts = range(0, nq, BLOCK_ROWS)
    if pool is not None:
        list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return num, mass


class StepContext:
    """Worker pool plus BLAS pinning for the duration of a run."""

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self.pool = None
        self._limiter = None

    def __enter__(self):
        self._limiter = threadpool_limits(limits=1, user_api="blas")
        if self.threads > 1:
            self.pool = ThreadPoolExecutor(max_workers=self.threads)
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None
        self._limiter.restore_original_limits()
        return False


def member_shifts(new: np.ndarray, old: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """L2 distance moved by each member."""
    d = new - old
    d *= d
    d *= weights
    return np.sqrt(d.sum(axis=1))
