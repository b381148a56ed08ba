"""Discretized L2([a, b]) arithmetic on a shared uniform grid.

Functions are stored by their values at the grid points and integrals use the
trapezoidal rule.  Because the trapezoid weights are positive, scaling every
column by ``sqrt(w_k)`` maps the discretized space isometrically onto plain
Euclidean space; the vectorized routines below rely on that.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import GridMismatch, ZeroMass

__all__ = [
    "GridSpec",
    "FunctionSample",
    "FunctionSet",
    "l2_inner",
    "l2_norm",
    "l2_dist",
    "weighted_mean",
    "pairwise_sq_dists",
    "write_csv",
    "read_csv",
    "write_binary",
    "read_binary",
    "read_set",
    "write_set",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``t_k = domain_lo + k * step`` with ``num_points`` nodes."""

    domain_lo: float
    domain_hi: float
    num_points: int

    def __post_init__(self):
        if not (np.isfinite(self.domain_lo) and np.isfinite(self.domain_hi)):
            raise ValueError("grid bounds must be finite")
        if not self.domain_lo < self.domain_hi:
            raise ValueError(
                f"domain_lo must be < domain_hi, got {self.domain_lo} >= {self.domain_hi}")
        if int(self.num_points) != self.num_points or self.num_points < 2:
            raise ValueError(f"num_points must be an integer >= 2, got {self.num_points}")
        object.__setattr__(self, "domain_lo", float(self.domain_lo))
        object.__setattr__(self, "domain_hi", float(self.domain_hi))
        object.__setattr__(self, "num_points", int(self.num_points))

    @property
    def step(self) -> float:
        return (self.domain_hi - self.domain_lo) / (self.num_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.domain_lo + self.step * np.arange(self.num_points)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.num_points, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def to_dict(self) -> dict:
        return {"domain_lo": self.domain_lo, "domain_hi": self.domain_hi,
                "num_points": self.num_points}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(d["domain_lo"], d["domain_hi"], d["num_points"])


@dataclass(frozen=True, eq=False)
class FunctionSample:
    """Values of a single curve at the grid points.

    ``isolated`` is set by the mean shift operator when no data member lay
    within the kernel support, in which case the input is returned as is.
    """

    id: object
    values: np.ndarray
    isolated: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("FunctionSample values must be one-dimensional")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


def _as_values(f, grid: GridSpec | None) -> np.ndarray:
    v = f.values if isinstance(f, FunctionSample) else np.asarray(f, dtype=float)
    if grid is not None and v.shape[-1] != grid.num_points:
        raise GridMismatch(
            f"function has {v.shape[-1]} values but the grid has {grid.num_points} points")
    return v


@dataclass(frozen=True, eq=False)
class FunctionSet:
    """Ordered collection of ``n`` curves on one grid.

    The values are held as an immutable ``(n, p)`` array; row ``i`` is the
    current position of trajectory ``i``.
    """

    grid: GridSpec
    values: np.ndarray
    ids: tuple = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("FunctionSet values must be a 2-D (n, p) array")
        if v.shape[0] < 1:
            raise ValueError("FunctionSet needs at least one member")
        if v.shape[1] != self.grid.num_points:
            raise GridMismatch(
                f"values have {v.shape[1]} columns but the grid has {self.grid.num_points} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("FunctionSet values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        ids = tuple(range(v.shape[0])) if self.ids is None else tuple(self.ids)
        if len(ids) != v.shape[0]:
            raise ValueError(f"got {len(ids)} ids for {v.shape[0]} members")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_samples(cls, grid: GridSpec, samples: Sequence[FunctionSample]) -> "FunctionSet":
        samples = list(samples)
        for s in samples:
            _as_values(s, grid)
        return cls(grid, np.stack([s.values for s in samples]), tuple(s.id for s in samples))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def __getitem__(self, i: int) -> FunctionSample:
        return FunctionSample(self.ids[i], self.values[i])

    def __iter__(self) -> Iterator[FunctionSample]:
        return (self[i] for i in range(self.n))

    @property
    def members(self) -> list[FunctionSample]:
        return list(self)

    def with_values(self, values: np.ndarray) -> "FunctionSet":
        """Same grid and ids, new positions."""
        return FunctionSet(self.grid, values, self.ids)

    def subset(self, idx: Iterable[int]) -> "FunctionSet":
        idx = np.asarray(list(idx) if not isinstance(idx, np.ndarray) else idx, dtype=np.intp)
        return FunctionSet(self.grid, self.values[idx], tuple(self.ids[i] for i in idx))

    def scaled(self) -> np.ndarray:
        """Values multiplied by the square-root quadrature weights (Euclidean embedding)."""
        return self.values * self.grid.sqrt_weights

    def check_grid(self, other: "FunctionSet") -> None:
        if self.grid != other.grid:
            raise GridMismatch(f"{self.grid} != {other.grid}")


def l2_inner(f, g, grid: GridSpec) -> float:
    """Trapezoidal approximation of the integral of ``f * g`` over the grid domain."""
    a = _as_values(f, grid)
    b = _as_values(g, grid)
    return float(np.dot(a * grid.weights, b))


def l2_norm(f, grid: GridSpec) -> float:
    return float(np.sqrt(max(l2_inner(f, f, grid), 0.0)))


def l2_dist(f, g, grid: GridSpec) -> float:
    d = _as_values(f, grid) - _as_values(g, grid)
    return float(np.sqrt(np.dot(d * grid.weights, d)))


def weighted_mean(points, weights) -> FunctionSample:
    """Pointwise ``sum_i w_i f_i / sum_i w_i``.

    ``points`` is a sequence of FunctionSamples or an ``(n, p)`` array.
    Raises ZeroMass when every weight is zero.
    """
    if isinstance(points, FunctionSet):
        X = points.values
    elif isinstance(points, np.ndarray):
        X = np.atleast_2d(points)
    else:
        X = np.stack([_as_values(f, None) for f in points])
    w = np.asarray(weights, dtype=float)
    if w.shape != (X.shape[0],):
        raise ValueError(f"{w.shape[0] if w.ndim else 0} weights for {X.shape[0]} points")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ZeroMass("all weights are zero")
    return FunctionSample("weighted_mean", (w @ X) / total)


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray, sq_a: np.ndarray | None = None,
                      sq_b: np.ndarray | None = None) -> np.ndarray:
    """Squared Euclidean distances between rows of already-scaled matrices.

    Uses the Gram expansion, so tiny negative values from cancellation are
    clipped to zero.  Callers should center the data first to keep the
    cancellation error small.
    """
    if sq_a is None:
        sq_a = np.einsum("ij,ij->i", A, A)
    if sq_b is None:
        sq_b = np.einsum("ij,ij->i", B, B)
    D = A @ B.T
    D *= -2.0
    D += sq_a[:, None]
    D += sq_b[None, :]
    np.maximum(D, 0.0, out=D)
    return D


# --------------------------------------------------------------------------
# serialization


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".grid.json")


def write_csv(fset: FunctionSet, path) -> None:
    """CSV with header ``id,t_0,...,t_{p-1}`` plus a ``<stem>.grid.json`` sidecar."""
    path = Path(path)
    p = fset.grid.num_points
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"t_{k}" for k in range(p)])
        for i in range(fset.n):
            w.writerow([fset.ids[i]] + [repr(float(x)) for x in fset.values[i]])
    _sidecar(path).write_text(json.dumps(fset.grid.to_dict(), indent=2) + "\n")


def read_csv(path, grid: GridSpec | None = None) -> FunctionSet:
    path = Path(path)
    if grid is None:
        grid = GridSpec.from_dict(json.loads(_sidecar(path).read_text()))
    ids, rows = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[0] != "id" or len(header) != grid.num_points + 1:
            raise GridMismatch(f"{path}: header does not match a {grid.num_points}-point grid")
        for row in r:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(x) for x in row[1:]])
    return FunctionSet(grid, np.array(rows, dtype=float).reshape(len(rows), grid.num_points), ids)


def write_binary(fset: FunctionSet, path) -> None:
    """Row-major little-endian float64 matrix plus sidecar (grid, n, ids)."""
    path = Path(path)
    fset.values.astype("<f8").tofile(path)
    meta = fset.grid.to_dict()
    meta["num_members"] = fset.n
    meta["ids"] = [str(i) for i in fset.ids]
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_binary(path) -> FunctionSet:
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    grid = GridSpec.from_dict(meta)
    X = np.fromfile(path, dtype="<f8")
    n = meta.get("num_members", X.size // grid.num_points)
    if X.size != n * grid.num_points:
        raise GridMismatch(f"{path}: {X.size} values is not {n} x {grid.num_points}")
    return FunctionSet(grid, X.reshape(n, grid.num_points).astype(float), meta.get("ids"))


def read_set(path) -> FunctionSet:
    """Dispatch on extension: ``.bin`` binary, anything else CSV."""
    return read_binary(path) if Path(path).suffix == ".bin" else read_csv(path)


def write_set(fset: FunctionSet, path) -> None:
    (write_binary if Path(path).suffix == ".bin" else write_csv)(fset, path)
