import math

import numpy as np
import pytest

from bfms.fspace import FunctionSet, GridSpec, l2_dist
from bfms.full import (
    RunConfig,
    average_density,
    bfms_step,
    ms_operator,
    nbfms_step,
    run_full,
    surrogate_density,
)
from bfms.kernel import BandwidthSchedule, KernelConfig
from bfms.synth import make_bump_clusters

from conftest import random_set

K0 = 1 / math.sqrt(2 * math.pi)          # K_1(0)
K1 = K0 * math.exp(-0.5)                 # K_1(1)


@pytest.fixture
def zero_one():
    g = GridSpec(0.0, 1.0, 21)
    return FunctionSet(g, np.stack([np.zeros(21), np.ones(21)]))


def test_singleton_is_fixed_point():
    s = random_set(1, seed=3)
    out = ms_operator(s[0], s, KernelConfig(0.5, 1.0))
    np.testing.assert_array_equal(out.values, s.values[0])
    assert not out.isolated


def test_equidistant_gives_midpoint():
    g = GridSpec(0.0, 1.0, 11)
    data = FunctionSet(g, np.stack([np.full(11, -1.0), np.full(11, 1.0)]))
    out = ms_operator(np.zeros(11), data, KernelConfig(0.7, 5.0))
    np.testing.assert_allclose(out.values, 0.0, atol=1e-15)


def test_operator_hand_computed_ratio(zero_one):
    assert K0 == pytest.approx(0.39894, abs=1e-5) and K1 == pytest.approx(0.24197, abs=1e-5)
    out = ms_operator(zero_one[0], zero_one, KernelConfig(1.0, 10.0))
    np.testing.assert_allclose(out.values, K1 / (K0 + K1), rtol=1e-12)
    assert K1 / (K0 + K1) == pytest.approx(0.37754, abs=1e-5)


def test_surrogate_density_examples(zero_one):
    cfg = KernelConfig(1.0, 10.0)
    assert surrogate_density(zero_one[0], zero_one, cfg) == pytest.approx((K0 + K1) / 2, rel=1e-12)
    assert (K0 + K1) / 2 == pytest.approx(0.32046, abs=1e-5)
    single = zero_one.subset([0])
    assert surrogate_density(single[0], single, KernelConfig(0.25, 1.0)) == pytest.approx(
        K0 / 0.25, rel=1e-14)
    assert surrogate_density(np.full(21, 50.0), zero_one, cfg) == 0.0


def test_isolated_query_returned_unchanged(zero_one):
    far = np.full(21, 50.0)
    out = ms_operator(far, zero_one, KernelConfig(1.0, 2.0))
    assert out.isolated
    np.testing.assert_array_equal(out.values, far)


def test_average_density_is_mean_of_member_densities():
    s = random_set(12, seed=8, scale=0.3)
    cfg = KernelConfig(0.3, 0.9)
    direct = np.mean([surrogate_density(f, s, cfg) for f in s])
    assert average_density(s, cfg) == pytest.approx(direct, rel=1e-12)


def test_step_collapsed_state_is_fixed():
    g = GridSpec(0.0, 1.0, 9)
    s = FunctionSet(g, np.tile(np.linspace(0, 1, 9), (5, 1)))
    np.testing.assert_allclose(bfms_step(s, KernelConfig(0.1, 0.5)).values, s.values, atol=1e-15)


def test_step_out_of_range_pair_unchanged(zero_one):
    out = bfms_step(zero_one, KernelConfig(0.3, 0.9))
    np.testing.assert_array_equal(out.values, zero_one.values)


def test_step_two_point_scalar_oracle(zero_one):
    """Two members at distance d move symmetrically; d' = d (K(0) - K(d)) / (K(0) + K(d))."""
    cfg = KernelConfig(1.0, 10.0)

    def k(d):
        return math.exp(-0.5 * d * d) / math.sqrt(2 * math.pi)

    d = 1.0
    state = zero_one
    for _ in range(6):
        new = bfms_step(state, cfg)
        moved = [l2_dist(new.values[i], state.values[i], new.grid) for i in range(2)]
        assert moved[0] == pytest.approx(moved[1], rel=1e-12)
        d = d * (k(0) - k(d)) / (k(0) + k(d))
        assert l2_dist(new.values[0], new.values[1], new.grid) == pytest.approx(d, rel=1e-10)
        state = new


def test_step_matches_operator_per_member():
    s = random_set(40, seed=2, scale=0.3)
    cfg = KernelConfig(0.4, 1.5)
    out = bfms_step(s, cfg)
    expected = np.stack([ms_operator(f, s, cfg).values for f in s])
    np.testing.assert_allclose(out.values, expected, rtol=1e-10, atol=1e-12)


def test_step_preserves_order_and_ids():
    s = random_set(7, seed=1)
    out = bfms_step(s, KernelConfig(1.0, 10.0))
    assert out.ids == s.ids


def test_convex_hull_does_not_expand():
    s = random_set(60, seed=5, scale=0.5)
    cfg = KernelConfig(0.3, 1.2)
    for _ in range(5):
        new = bfms_step(s, cfg)
        assert np.all(new.values.max(axis=0) <= s.values.max(axis=0) + 1e-12)
        assert np.all(new.values.min(axis=0) >= s.values.min(axis=0) - 1e-12)
        s = new


def test_isolation_bitwise():
    """Removing a group farther than tau from everything else leaves the rest untouched."""
    a, _, _ = make_bump_clusters(30, 1, noise=0.05, seed=1)
    far = a.values + 10.0
    both = FunctionSet(a.grid, np.vstack([a.values, far]))
    cfg = KernelConfig(0.05, 0.2)
    np.testing.assert_array_equal(bfms_step(both, cfg).values[:30], bfms_step(a, cfg).values)


def test_threads_do_not_change_results():
    s = random_set(700, seed=4, scale=0.2)
    cfg = KernelConfig(0.3, 1.0)
    np.testing.assert_array_equal(bfms_step(s, cfg, threads=1).values,
                                  bfms_step(s, cfg, threads=4).values)


def test_nbfms_keeps_data_fixed():
    data = random_set(25, seed=6, scale=0.3)
    q = random_set(5, seed=7, scale=0.3)
    cfg = KernelConfig(0.4, 1.5)
    out = nbfms_step(q, data, cfg)
    expected = np.stack([ms_operator(f, data, cfg).values for f in q])
    np.testing.assert_allclose(out.values, expected, rtol=1e-10, atol=1e-12)


def test_nbfms_isolated_flag(zero_one):
    q = FunctionSet(zero_one.grid, np.stack([np.full(21, 0.1), np.full(21, 40.0)]))
    out, isolated = nbfms_step(q, zero_one, KernelConfig(1.0, 2.0), return_isolated=True)
    assert isolated.tolist() == [False, True]
    np.testing.assert_array_equal(out.values[1], q.values[1])


def test_run_collapsed_converges_immediately():
    g = GridSpec(0.0, 1.0, 9)
    s = FunctionSet(g, np.tile(np.sin(g.points), (4, 1)))
    tr = run_full(s, RunConfig(BandwidthSchedule.constant(0.2, 1.0), 1e-10, 50))
    assert tr.converged and tr.iters_used == 1
    assert tr.records[0].max_shift < 1e-15


def test_run_three_separated_clusters():
    data, labels, centers = make_bump_clusters(90, 3, noise=0.05, seed=3)
    tau = 0.12
    tr = run_full(data, RunConfig(BandwidthSchedule.constant(0.04, tau), 1e-8, 500))
    assert tr.converged
    limits = np.unique(np.round(tr.final.values, 5), axis=0)
    assert len(limits) == 3
    d = [l2_dist(limits[i], limits[j], data.grid) for i in range(3) for j in range(i + 1, 3)]
    assert min(d) > tau


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_density_monotone_for_constant_h(seed):
    s = random_set(50, seed=seed, scale=0.3)
    tr = run_full(s, RunConfig(BandwidthSchedule.constant(0.25, 1.0), 1e-9, 300))
    d = tr.avg_density
    assert np.all(np.diff(d) >= -1e-10 * np.maximum(1.0, d[:-1]))


def test_fixed_point_consistency():
    data, _, _ = make_bump_clusters(60, 2, noise=0.05, seed=9)
    eps = 1e-7
    sched = BandwidthSchedule.constant(0.04, 0.12)
    tr = run_full(data, RunConfig(sched, eps, 500))
    assert tr.converged
    again = bfms_step(tr.final, sched.kernel(0))
    moved = [l2_dist(a, b, data.grid) for a, b in zip(again.values, tr.final.values)]
    assert max(moved) < 2 * eps


def test_nonconvergence_reported_not_raised():
    s = random_set(20, seed=1, scale=0.3)
    tr = run_full(s, RunConfig(BandwidthSchedule(tau=1.0), 1e-14, 2))
    assert not tr.converged and tr.iters_used == 2
    assert [r.h for r in tr.records] == pytest.approx([5 / (100 * math.sqrt(2)),
                                                       7 / (100 * math.sqrt(2))])


def test_nonblurring_run_data_fixed():
    s = random_set(15, seed=3, scale=0.2)
    tr = run_full(s, RunConfig(BandwidthSchedule.constant(0.3, 1.0), 1e-9, 200, "non_blurring"))
    # each limit is a fixed point of the operator against the original data
    for f in tr.final:
        np.testing.assert_allclose(ms_operator(f, s, KernelConfig(0.3, 1.0)).values, f.values,
                                   atol=1e-7)


def test_trace_csv(tmp_path):
    s = random_set(10, seed=0, scale=0.2)
    tr = run_full(s, RunConfig(BandwidthSchedule.constant(0.3, 1.0), 1e-6, 50))
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "nu,h,avg_density,max_shift,mean_shift"
    assert len(lines) == tr.iters_used + 1
