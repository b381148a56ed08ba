"""Seeded synthetic curve generators with known cluster labels."""

from __future__ import annotations

import numpy as np

from .clustering import smooth_perturbation
from .fspace import FunctionSet, GridSpec

__all__ = ["bump_centers", "make_bump_clusters"]


def bump_centers(grid: GridSpec, k: int, amplitude: float = 1.0, width: float = 0.08) -> FunctionSet:
    """``k`` Gaussian bumps with evenly spaced locations on the grid domain."""
    t = (grid.points - grid.domain_lo) / (grid.domain_hi - grid.domain_lo)
    locs = np.linspace(0.15, 0.85, k) if k > 1 else np.array([0.5])
    C = amplitude * np.exp(-0.5 * ((t[None, :] - locs[:, None]) / width) ** 2)
    return FunctionSet(grid, C, [f"center_{j}" for j in range(k)])


def make_bump_clusters(n: int, k: int, grid: GridSpec | None = None, amplitude: float = 1.0,
                       width: float = 0.08, noise: float = 0.05, seed: int = 0,
                       shuffle: bool = True):
    """Curves scattered around ``k`` bump means.

    Each curve is its cluster mean plus a smooth random perturbation whose L2
    norm is drawn uniformly from ``(0, noise)``, so every cluster has
    diameter below ``2 * noise``.

    Returns:
        (FunctionSet, labels, centers)
    """
    grid = GridSpec(0.0, 1.0, 50) if grid is None else grid
    rng = np.random.default_rng(seed)
    centers = bump_centers(grid, k, amplitude, width)
    labels = np.arange(n) % k
    if shuffle:
        labels = rng.permutation(labels)
    X = centers.values[labels].copy()
    for i in range(n):
        X[i] += smooth_perturbation(grid, rng.uniform(0.0, noise), rng)
    return FunctionSet(grid, X, [f"curve_{i}" for i in range(n)]), labels, centers
