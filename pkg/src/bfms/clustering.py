"""Cluster membership after convergence, center separation and perturbation stability."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .exceptions import InvalidExperiment
from .fspace import FunctionSet, l2_norm
from .full import RunConfig, run_full

__all__ = [
    "ClusterResult",
    "assign_clusters",
    "check_separation",
    "stability_experiment",
    "smooth_perturbation",
    "write_labels",
]


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: np.ndarray
    centers: FunctionSet
    sizes: np.ndarray
    merge_radius: float

    @property
    def k(self) -> int:
        return len(self.sizes)


def _canonical_labels(raw: np.ndarray) -> np.ndarray:
    """Renumber so cluster 0 is the largest; ties go to the cluster holding the smaller index."""
    uniq, first, counts = np.unique(raw, return_index=True, return_counts=True)
    order = np.lexsort((first, -counts))
    remap = np.empty(len(uniq), dtype=np.intp)
    remap[order] = np.arange(len(uniq))
    return remap[np.searchsorted(uniq, raw)]


def assign_clusters(final_state: FunctionSet, merge_radius: float) -> ClusterResult:
    """Single-linkage grouping of converged members.

    Members ``i`` and ``j`` end up together iff a chain of pairwise L2
    distances ``<= merge_radius`` connects them.  Centers are member means.
    """
    if not merge_radius > 0:
        raise ValueError("merge_radius must be positive")
    n = final_state.n
    pairs = cKDTree(final_state.scaled()).query_pairs(merge_radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    labels = _canonical_labels(raw)
    k = labels.max() + 1
    sizes = np.bincount(labels, minlength=k)
    centers = np.zeros((k, final_state.grid.num_points))
    np.add.at(centers, labels, final_state.values)
    centers /= sizes[:, None]
    return ClusterResult(labels, FunctionSet(final_state.grid, centers, tuple(range(k))),
                         sizes, float(merge_radius))


def check_separation(result: ClusterResult, tau: float) -> dict:
    """List center pairs closer than or equal to ``tau``."""
    C = result.centers
    violations = []
    if C.n > 1:
        d = pdist(C.scaled())
        iu = np.triu_indices(C.n, k=1)
        for a, b, dist in zip(iu[0], iu[1], d):
            if dist <= tau:
                violations.append({"a": int(a), "b": int(b), "distance": float(dist)})
        min_d = float(d.min())
    else:
        min_d = None
    return {"tau": float(tau), "k": C.n, "min_center_distance": min_d,
            "violations": violations, "passed": not violations}


def smooth_perturbation(grid, norm: float, rng: np.random.Generator, n_terms: int = 4) -> np.ndarray:
    """Random low-frequency curve rescaled to the requested L2 norm."""
    t = (grid.points - grid.domain_lo) / (grid.domain_hi - grid.domain_lo)
    coef = rng.standard_normal((n_terms, 2)) / np.arange(1, n_terms + 1)[:, None]
    k = np.arange(1, n_terms + 1)[:, None]
    e = coef[:, :1] * np.sin(np.pi * k * t) + coef[:, 1:] * np.cos(np.pi * k * t)
    e = e.sum(axis=0)
    nrm = l2_norm(e, grid)
    return e * (norm / nrm) if norm > 0 else np.zeros_like(e)


def stability_experiment(centers: FunctionSet, sizes, tau: float, perturbation_scale: float,
                         reps: int, seed: int, run_cfg: RunConfig, epsilon: float = 0.0,
                         threads: int = 1) -> dict:
    """Replicate centers, perturb every copy, rerun blurring mean shift, compare memberships.

    Each perturbation norm is drawn uniformly from ``(0, perturbation_scale)``.
    Centers must be more than ``tau + epsilon`` apart and the scale below
    ``tau / 2``, otherwise InvalidExperiment is raised.
    """
    sizes = np.asarray(sizes, dtype=int)
    if len(sizes) != centers.n or np.any(sizes < 1):
        raise InvalidExperiment("need one positive size per center")
    if centers.n > 1:
        dmin = pdist(centers.scaled()).min()
        if not dmin > tau + epsilon:
            raise InvalidExperiment(
                f"centers are {dmin:.4g} apart, need more than tau + epsilon = {tau + epsilon:.4g}")
    if not 0 <= perturbation_scale < tau / 2:
        raise InvalidExperiment("perturbation scale must lie in [0, tau/2)")
    if run_cfg.mode != "blurring":
        raise InvalidExperiment("stability is stated for the blurring iteration")

    truth = np.repeat(np.arange(centers.n), sizes)
    base = centers.values[truth]
    rng = np.random.default_rng(seed)
    outcomes = []
    for r in range(reps):
        pert = np.empty_like(base)
        norms = rng.uniform(0.0, perturbation_scale, size=len(truth)) if perturbation_scale > 0 \
            else np.zeros(len(truth))
        for i, nrm in enumerate(norms):
            pert[i] = smooth_perturbation(centers.grid, nrm, rng)
        init = FunctionSet(centers.grid, base + pert)
        trace = run_full(init, run_cfg, threads=threads)
        res = assign_clusters(trace.final, max(10 * run_cfg.epsilon, 1e-12))
        same = _same_partition(res.labels, truth)
        outcomes.append({"rep": r, "preserved": bool(same), "k": res.k,
                         "iters": trace.iters_used, "converged": trace.converged,
                         "max_perturbation": float(norms.max())})
    passed = sum(o["preserved"] for o in outcomes)
    return {"reps": reps, "passed": passed, "failed": reps - passed, "tau": float(tau),
            "perturbation_scale": float(perturbation_scale), "runs": outcomes}


def _same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """True when two label vectors induce the same partition."""
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def write_labels(result: ClusterResult, ids, path, provenance: dict | None = None) -> None:
    """``id,cluster`` CSV; provenance columns (e.g. lat, lon) are appended when given."""
    extra = list(provenance) if provenance else []
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "cluster"] + extra)
        for i, lab in zip(ids, result.labels):
            w.writerow([i, int(lab)] + [provenance[c].get(str(i), "") for c in extra])
