import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bfms.exceptions import InsufficientData
from bfms.fspace import FunctionSet, GridSpec, l2_dist
from bfms.kernel import (
    BandwidthSchedule,
    KernelConfig,
    estimate_tau,
    kernel_eval,
    kernel_values,
    schedule_bandwidth,
)
from bfms.synth import make_bump_clusters


def test_kernel_examples():
    assert kernel_eval(0.0, KernelConfig(1.0, 1.0)) == pytest.approx(0.3989423, abs=1e-7)
    assert kernel_eval(2.0, KernelConfig(0.7, 1.0)) == 0.0
    # 1 / (sqrt(2 pi) * 0.5) * exp(-1/2) = 0.797885 * 0.606531
    assert kernel_eval(0.5, KernelConfig(0.5, 10.0)) == pytest.approx(0.4839414, abs=1e-7)


def test_support_is_closed():
    cfg = KernelConfig(0.3, 1.0)
    assert kernel_eval(1.0, cfg) > 0
    assert kernel_eval(math.nextafter(1.0, 2.0), cfg) == 0.0


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.05, 3), st.floats(0.1, 4))
def test_kernel_nonincreasing_and_support(a, b, h, tau):
    cfg = KernelConfig(h, tau)
    lo, hi = sorted((a, b))
    assert kernel_eval(lo, cfg) >= kernel_eval(hi, cfg)
    if a > tau:
        assert kernel_eval(a, cfg) == 0.0
    elif a / h < 30:
        assert kernel_eval(a, cfg) > 0.0


def test_vectorized_matches_scalar():
    cfg = KernelConfig(0.4, 1.1)
    d = np.linspace(0, 2, 41)
    np.testing.assert_allclose(kernel_values(d ** 2, cfg), [kernel_eval(x, cfg) for x in d],
                               rtol=1e-14)


def test_schedule_examples():
    s = BandwidthSchedule(tau=1.0)
    assert schedule_bandwidth(0, s) == pytest.approx(0.0353553, abs=1e-7)
    assert schedule_bandwidth(10, s) == pytest.approx(0.1767767, abs=1e-7)
    c = BandwidthSchedule.constant(0.3, tau=1.0)
    assert all(schedule_bandwidth(nu, c) == 0.3 for nu in (0, 7, 1000))


def test_schedule_strictly_increasing():
    s = BandwidthSchedule(tau=2.5)
    h = [schedule_bandwidth(nu, s) for nu in range(200)]
    assert all(b > a for a, b in zip(h, h[1:]))


def test_bad_configs():
    with pytest.raises(ValueError):
        KernelConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        BandwidthSchedule(tau=1.0, rule="constant")
    with pytest.raises(ValueError):
        schedule_bandwidth(-1, BandwidthSchedule(tau=1.0))


def test_tau_two_members():
    g = GridSpec(0.0, 1.0, 11)
    s = FunctionSet(g, np.stack([np.zeros(11), np.full(11, 3.0)]))
    assert estimate_tau(s, 10, 20.0, seed=0) == pytest.approx(3.0)


def test_tau_equidistant():
    # spikes at distinct interior nodes are pairwise sqrt(2 * step) * a apart
    g = GridSpec(0.0, 4.0, 5)
    a = 2.0 / math.sqrt(2 * g.step)
    X = np.zeros((3, 5))
    X[[0, 1, 2], [1, 2, 3]] = a
    s = FunctionSet(g, X)
    for i, j in itertools.combinations(range(3), 2):
        assert l2_dist(X[i], X[j], g) == pytest.approx(2.0)
    assert estimate_tau(s, 3, 20.0, seed=5) == pytest.approx(2.0)


def test_tau_matches_brute_force():
    data, _, _ = make_bump_clusters(100, 2, noise=0.1, seed=4)
    seed, size = 11, 60
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(100, size=size, replace=False))
    d = [l2_dist(data.values[i], data.values[j], data.grid)
         for i, j in itertools.combinations(idx, 2)]
    d = np.sort(d)
    pos = 0.20 * (len(d) - 1)
    lo = int(np.floor(pos))
    expected = d[lo] + (pos - lo) * (d[lo + 1] - d[lo])
    assert estimate_tau(data, size, 20.0, seed) == pytest.approx(expected, rel=1e-12)


def test_tau_permutation_invariant_for_same_sample():
    data, _, _ = make_bump_clusters(30, 2, noise=0.1, seed=2)
    perm = np.random.default_rng(0).permutation(30)
    # full sample: the set of drawn indices is all members either way
    assert estimate_tau(data, 30, 20.0, 1) == pytest.approx(
        estimate_tau(data.subset(perm), 30, 20.0, 9), rel=1e-12)


def test_tau_needs_two_members():
    with pytest.raises(InsufficientData):
        estimate_tau(FunctionSet(GridSpec(0, 1, 3), np.zeros((1, 3))), 5)
