import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfms.clustering import (
    assign_clusters,
    check_separation,
    smooth_perturbation,
    stability_experiment,
    write_labels,
)
from bfms.exceptions import InvalidExperiment
from bfms.fspace import FunctionSet, GridSpec, l2_dist, l2_norm
from bfms.full import RunConfig
from bfms.kernel import BandwidthSchedule

GRID = GridSpec(0.0, 1.0, 11)


def _union_find_partition(X, grid, radius):
    """Reference single-linkage: brute-force pairs plus union-find."""
    n = len(X)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if l2_dist(X[i], X[j], grid) <= radius:
                parent[find(i)] = find(j)
    roots = [find(i) for i in range(n)]
    return {frozenset(k for k in range(n) if roots[k] == r) for r in set(roots)}


def _partition(labels):
    return {frozenset(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels)}


def _const(vals):
    return FunctionSet(GRID, np.array([np.full(11, v) for v in vals], dtype=float))


def test_assign_examples():
    res = assign_clusters(_const([0.0, 0.0, 1.0, 1.0, 1.0]), 0.01)
    assert res.labels.tolist() == [1, 1, 0, 0, 0]
    assert res.sizes.tolist() == [3, 2]
    np.testing.assert_allclose(res.centers.values[:, 0], [1.0, 0.0])


def test_chain_links_through_intermediate():
    res = assign_clusters(_const([0.0, 0.009, 0.018]), 0.01)
    assert res.k == 1


def test_tie_broken_by_smallest_index():
    res = assign_clusters(_const([5.0, 0.0, 5.0, 0.0]), 1e-6)
    assert res.labels.tolist() == [0, 1, 0, 1]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=25), st.integers(0, 1000))
def test_matches_union_find_and_permutation(levels, seed):
    rng = np.random.default_rng(seed)
    X = np.array([np.full(11, 0.3 * v) for v in levels]) + 1e-4 * rng.standard_normal(
        (len(levels), 11))
    s = FunctionSet(GRID, X)
    res = assign_clusters(s, 0.05)
    assert _partition(res.labels) == _union_find_partition(X, GRID, 0.05)
    assert res.sizes.tolist() == sorted(res.sizes.tolist(), reverse=True)
    perm = rng.permutation(len(levels))
    res_p = assign_clusters(s.subset(perm), 0.05)
    back = {frozenset(perm[list(c)].tolist()) for c in _partition(res_p.labels)}
    assert back == _partition(res.labels)


def test_merge_radius_must_be_positive():
    with pytest.raises(ValueError):
        assign_clusters(_const([0.0]), 0.0)


def test_separation_examples():
    res = assign_clusters(_const([0.0, 0.0, 1.0]), 0.01)
    assert check_separation(res, 0.5)["passed"]
    rep = check_separation(res, 1.0)
    assert not rep["passed"] and rep["violations"][0]["distance"] == pytest.approx(1.0)
    one = assign_clusters(_const([2.0, 2.0]), 0.01)
    assert check_separation(one, 1.0)["passed"]


def test_smooth_perturbation_norm():
    rng = np.random.default_rng(0)
    g = GridSpec(0.0, 1.0, 50)
    for nrm in (0.0, 0.01, 0.3):
        assert l2_norm(smooth_perturbation(g, nrm, rng), g) == pytest.approx(nrm, abs=1e-14)


def _two_centers(tau, grid):
    return FunctionSet(grid, np.stack([np.zeros(grid.num_points),
                                       np.full(grid.num_points, 3 * tau)]))


def test_stability_preserves_membership():
    tau = 0.2
    g = GridSpec(0.0, 1.0, 30)
    rep = stability_experiment(_two_centers(tau, g), [15, 15], tau, 0.45 * tau, reps=5, seed=1,
                               run_cfg=RunConfig(BandwidthSchedule(tau=tau), 1e-8, 500))
    assert rep["passed"] == 5
    assert all(r["k"] == 2 and r["converged"] for r in rep["runs"])


def test_stability_rejects_half_tau():
    tau = 0.2
    g = GridSpec(0.0, 1.0, 30)
    cfg = RunConfig(BandwidthSchedule(tau=tau), 1e-8, 50)
    with pytest.raises(InvalidExperiment):
        stability_experiment(_two_centers(tau, g), [3, 3], tau, 0.5 * tau, 1, 0, cfg)


def test_stability_rejects_close_centers():
    g = GridSpec(0.0, 1.0, 30)
    C = FunctionSet(g, np.stack([np.zeros(30), np.full(30, 0.2)]))
    with pytest.raises(InvalidExperiment):
        stability_experiment(C, [3, 3], 0.2, 0.05, 1, 0,
                             RunConfig(BandwidthSchedule(tau=0.2), 1e-8, 50))


def test_write_labels(tmp_path):
    res = assign_clusters(_const([0.0, 1.0, 1.0]), 0.01)
    write_labels(res, ["a", "b", "c"], tmp_path / "l.csv",
                 provenance={"lat": {"a": "1.5", "b": "2"}, "lon": {"a": "3"}})
    rows = list(csv.reader(open(tmp_path / "l.csv")))
    assert rows == [["id", "cluster", "lat", "lon"], ["a", "1", "1.5", "3"],
                    ["b", "0", "2", ""], ["c", "0", "", ""]]
