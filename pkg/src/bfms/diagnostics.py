"""Numerical counterparts of the convergence analysis.

Closed-form first and second Gateaux derivatives of the surrogate density,
finite-difference cross checks, a stationarity/mode check for converged
states, the quadratic minorizer used in the monotonicity argument, and the
exponential convexity inequality behind it.

Throughout, ``phi`` is the standard normal density, so that the kernel is
``K_h(t) = phi(t / h) / h`` restricted to ``t <= tau``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import CoincidentPoint, GridMismatch
from .fspace import FunctionSet, _as_values, l2_norm
from .full import surrogate_density
from .kernel import KernelConfig, kernel_values

__all__ = [
    "DerivativeReport",
    "gateaux_first",
    "gateaux_second",
    "check_first_derivative",
    "check_second_derivative",
    "check_stationarity",
    "stationarity_tolerance",
    "minorizer_value",
    "pairwise_density",
    "kernel_lemma_check",
    "pi_h",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
REL_FLOOR = 1e-12


def _phi(t):
    return _INV_SQRT_2PI * np.exp(-0.5 * t * t)


def _offsets(f, data: FunctionSet, cfg: KernelConfig):
    """``f - f_i`` for in-support members, their distances and the phi weights."""
    fv = _as_values(f, data.grid)
    diff = fv - data.values
    r = np.sqrt(np.einsum("ij,ij,j->i", diff, diff, data.grid.weights))
    keep = r <= cfg.tau
    return fv, diff[keep], r[keep], _phi(r[keep] / cfg.h)


def gateaux_first(f, data: FunctionSet, g, cfg: KernelConfig) -> float:
    """Directional derivative of the surrogate density at ``f`` along ``g``.

    ``-(1 / (n h^3)) * sum_i phi(r_i / h) <f - f_i, g>`` over members with
    ``r_i = ||f - f_i|| <= tau``.
    """
    grid = data.grid
    gv = _as_values(g, grid)
    _, diff, _, w = _offsets(f, data, cfg)
    inner = diff @ (gv * grid.weights)
    return float(-(w @ inner) / (data.n * cfg.h ** 3))


def gateaux_second(f, data: FunctionSet, g1, g2, cfg: KernelConfig,
                   coincident: str = "raise") -> float:
    """Second Gateaux derivative along ``(g1, g2)``.

    The general expression divides ``phi'(r_i / h)`` by ``r_i``; for the
    Gaussian ``phi'(t) = -t phi(t)`` that ratio has the finite limit
    ``-phi(r_i / h) / h`` at ``r_i = 0``.  With ``coincident="raise"`` a
    member sitting exactly on ``f`` raises CoincidentPoint; with
    ``coincident="limit"`` the limit value is used.
    """
    if coincident not in ("raise", "limit"):
        raise ValueError("coincident must be 'raise' or 'limit'")
    grid = data.grid
    a = _as_values(g1, grid) * grid.weights
    b = _as_values(g2, grid)
    _, diff, r, w = _offsets(f, data, cfg)
    if coincident == "raise" and np.any(r == 0):
        raise CoincidentPoint("a data member coincides with f")
    h = cfg.h
    ia = diff @ a
    ib = diff @ (b * grid.weights)
    # phi'(r/h) / r = -(1/h) phi(r/h)
    first = -(1.0 / (data.n * h ** 4)) * np.sum((-w / h) * ia * ib)
    second = -(1.0 / (data.n * h ** 3)) * np.sum(w) * float(a @ b)
    return float(first + second)


@dataclass(frozen=True)
class DerivativeReport:
    analytic: float
    finite_diff: float
    rel_error: float
    step_used: float
    richardson: tuple = ()

    def to_dict(self) -> dict:
        return asdict(self)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), REL_FLOOR)


def _default_step(f, grid) -> float:
    return 1e-5 * (1.0 + l2_norm(f, grid))


def check_first_derivative(f, data: FunctionSet, g, cfg: KernelConfig,
                           step: float | None = None) -> DerivativeReport:
    """Compare the closed form with a central difference of the surrogate density.

    ``richardson`` holds the central differences at ``step``, ``step/2`` and
    their Richardson extrapolation.
    """
    fv = _as_values(f, data.grid)
    gv = _as_values(g, data.grid)
    eps = _default_step(fv, data.grid) if step is None else step

    def cd(e):
        return (surrogate_density(fv + e * gv, data, cfg)
                - surrogate_density(fv - e * gv, data, cfg)) / (2 * e)

    d1, d2 = cd(eps), cd(eps / 2)
    an = gateaux_first(fv, data, gv, cfg)
    return DerivativeReport(an, d1, _rel(an, d1), eps, (d1, d2, (4 * d2 - d1) / 3))


def check_second_derivative(f, data: FunctionSet, g1, g2, cfg: KernelConfig,
                            step: float | None = None) -> DerivativeReport:
    """Central difference of ``gateaux_first(., g1)`` along ``g2`` against the closed form."""
    fv = _as_values(f, data.grid)
    a = _as_values(g1, data.grid)
    b = _as_values(g2, data.grid)
    eps = _default_step(fv, data.grid) if step is None else step

    def cd(e):
        return (gateaux_first(fv + e * b, data, a, cfg)
                - gateaux_first(fv - e * b, data, a, cfg)) / (2 * e)

    d1, d2 = cd(eps), cd(eps / 2)
    an = gateaux_second(fv, data, a, b, cfg, coincident="limit")
    return DerivativeReport(an, d1, _rel(an, d1), eps, (d1, d2, (4 * d2 - d1) / 3))


def stationarity_tolerance(epsilon: float, h: float) -> float:
    """Bound on ``|gateaux_first|`` along unit directions at an epsilon-converged state.

    At a member ``f``, ``sum_i phi(r_i/h) (f - f_i) = n rho_phi (f - M(f))``
    with ``rho_phi <= phi(0) < 1``, so the derivative is at most
    ``||f - M(f)|| / h^3``.  The next shift of a converged run is below
    epsilon; a factor 10 covers stopping slack.
    """
    return 10.0 * epsilon / h ** 3


def _unit_directions(grid, count: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((count, grid.num_points))
    norms = np.sqrt(np.einsum("ij,ij,j->i", G, G, grid.weights))
    return G / norms[:, None]


def check_stationarity(state: FunctionSet, cfg: KernelConfig, directions: int = 20,
                       seed: int = 0, tol: float | None = None,
                       epsilon: float | None = None) -> dict:
    """First-derivative and mode checks at every member of a (converged) state.

    ``tol`` defaults to ``stationarity_tolerance(epsilon, h)``.  The negative
    curvature test is only asserted for members whose in-support neighbours
    all lie within ``h``; for the others it is reported but not judged.
    """
    if tol is None:
        if epsilon is None:
            raise ValueError("give either tol or epsilon")
        tol = stationarity_tolerance(epsilon, cfg.h)
    rng = np.random.default_rng(seed)
    dirs = _unit_directions(state.grid, directions, rng)
    members = []
    for i in range(state.n):
        f = state.values[i]
        firsts = np.array([gateaux_first(f, state, g, cfg) for g in dirs])
        _, _, r, _ = _offsets(f, state, cfg)
        mode_applicable = bool(np.all(r < cfg.h))
        seconds = np.array([gateaux_second(f, state, g, g, cfg, coincident="limit")
                            for g in dirs])
        first_ok = bool(np.max(np.abs(firsts)) <= tol)
        mode_ok = bool(np.all(seconds < 0)) if mode_applicable else None
        members.append({
            "index": i,
            "max_abs_first": float(np.max(np.abs(firsts))),
            "max_second": float(np.max(seconds)),
            "first_ok": first_ok,
            "mode_applicable": mode_applicable,
            "mode_ok": mode_ok,
            "passed": first_ok and mode_ok is not False,
        })
    return {
        "check": "stationarity",
        "tolerance": float(tol),
        "tolerance_formula": "10 * epsilon / h**3",
        "h": cfg.h,
        "tau": cfg.tau,
        "directions": directions,
        "members": members,
        "passed": all(m["passed"] for m in members),
    }


def _sq_dist_matrix(F: FunctionSet) -> np.ndarray:
    X = F.scaled()
    return cdist(X, X, "sqeuclidean")


def pairwise_density(F: FunctionSet, cfg: KernelConfig) -> float:
    """Average surrogate density ``(1/n^2) sum_ij K_h(||f_i - f_j||)`` from exact differences."""
    return float(kernel_values(_sq_dist_matrix(F), cfg).sum() / F.n ** 2)


def minorizer_value(F: FunctionSet, F_nu: FunctionSet, cfg: KernelConfig) -> float:
    """Quadratic lower bound of the average density at ``F``, tangent at ``F_nu``.

    ``rho(F_nu) + 1/(2 n^2 h^2) sum_ij K_h(||f_i^nu - f_j^nu||)
    (||f_i^nu - f_j^nu||^2 - ||f_i - f_j||^2)``.
    """
    if F.grid != F_nu.grid:
        raise GridMismatch(f"{F.grid} != {F_nu.grid}")
    if F.n != F_nu.n:
        raise ValueError("configurations must have the same number of members")
    n = F.n
    D_nu = _sq_dist_matrix(F_nu)
    K = kernel_values(D_nu, cfg)
    rho_nu = K.sum() / n ** 2
    quad = np.sum(K * (D_nu - _sq_dist_matrix(F)))
    return float(rho_nu + quad / (2.0 * n ** 2 * cfg.h ** 2))


def pi_h(t, h):
    return np.exp(-np.asarray(t, dtype=float) / h ** 2)


def kernel_lemma_check(x, y, h, slack: float = 1e-14):
    """``pi_h(x) - pi_h(y) >= pi_h(y) (y - x) / h^2`` with ``pi_h(t) = exp(-t / h^2)``.

    Vectorized; returns a bool or a boolean array.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    py = pi_h(y, h)
    lhs = pi_h(x, h) - py
    rhs = py * (y - x) / h ** 2
    ok = lhs >= rhs - slack
    return bool(ok) if ok.ndim == 0 else ok
