"""Distribution evolution, mixing times, and the statistical harness."""

import itertools
import math

import numpy as np
import pytest

from kwmix.chains import ChainSpec, build_kernel
from kwmix.mixing import (
    evolve,
    kwise_stat_mc,
    kwise_tv_exact,
    mixing_time_exact,
    pointwise_relative_error,
    sample_uniform_tuples,
    statistic_law,
    tv_curve,
    tv_distance,
)
from kwmix.rng import make_rng


@pytest.fixture(scope="module")
def rev32():
    return build_kernel(ChainSpec(family="rev", k=2, n=3))


def test_evolve_zero_steps_is_point_mass(rev32):
    p = evolve(rev32, 5, 0)
    assert p[5] == 1.0 and p.sum() == 1.0


def test_complete_graph_is_uniform_after_one_step():
    kernel = build_kernel(ChainSpec(family="complete", ncolors=7))
    p = evolve(kernel, 2, 1)
    assert np.allclose(p, 1 / 7, atol=1e-16)


def test_evolution_conserves_mass(rev32):
    p = evolve(rev32, 0, 5)
    assert abs(p.sum() - 1.0) <= 1e-12


def test_tv_identical_and_disjoint():
    assert tv_distance(np.array([0.3, 0.7]), np.array([0.3, 0.7])) == 0.0
    assert tv_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0


def test_tv_point_mass_vs_uniform():
    for m in (4, 9):
        point = np.zeros(m)
        point[0] = 1.0
        assert tv_distance(point, np.full(m, 1 / m)) == pytest.approx(1 - 1 / m)


def test_mixing_time_complete_graph_is_one():
    kernel = build_kernel(ChainSpec(family="complete", ncolors=5))
    for eps in (0.5, 0.25, 0.01):
        assert mixing_time_exact(kernel, eps) == 1


def test_mixing_time_monotone_in_epsilon(rev32):
    taus = [mixing_time_exact(rev32, eps) for eps in (0.4, 0.25, 0.1, 0.02)]
    assert taus == sorted(taus)
    assert taus[-1] < 200


def test_tv_curve_nonincreasing(rev32):
    for start in (0, 17, 55):
        curve = tv_curve(rev32, start, 40)
        diffs = np.diff(curve)
        assert (diffs <= 1e-12).all()


def test_tv_curve_nonincreasing_other_chains():
    for spec in [ChainSpec(family="ucc", k=2, ncolors=5),
                 ChainSpec(family="cc", k=2, ncolors=5)]:
        kernel = build_kernel(spec)
        curve = tv_curve(kernel, 0, 30)
        assert (np.diff(curve) <= 1e-12).all()


def test_pointwise_relative_error_decays(rev32):
    errs = [pointwise_relative_error(rev32, 0, t) for t in (0, 5, 15, 40)]
    assert errs[-1] < 0.1
    assert errs[-1] < errs[0]


def test_pointwise_threshold_finite_and_monotone(rev32):
    # t*(eps): first step where the worst-start relative error dips below
    # eps; must be finite and nondecreasing as eps shrinks
    def threshold(eps):
        for t in range(400):
            worst = max(pointwise_relative_error(rev32, s, t)
                        for s in range(rev32.size))
            if worst <= eps:
                return t
        raise AssertionError(f"threshold for eps={eps} not reached")

    thresholds = [threshold(eps) for eps in (0.5, 0.2, 0.1)]
    assert thresholds == sorted(thresholds)


def test_kwise_tv_at_zero_steps():
    size = 8 * 7
    assert kwise_tv_exact(3, 2, 0) == pytest.approx(1 - 1 / size, abs=1e-14)


def test_kwise_tv_decays_monotonically():
    values = [kwise_tv_exact(3, 2, t) for t in range(0, 25, 4)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] < 0.1


def test_kwise_tv_k1_matches_single_string_chain():
    kernel = build_kernel(ChainSpec(family="rev", k=1, n=3))
    for t in (0, 1, 3, 7):
        direct = max(
            tv_distance(evolve(kernel, s, t), kernel.stationary)
            for s in range(kernel.size)
        )
        assert kwise_tv_exact(3, 1, t) == pytest.approx(direct, abs=1e-14)


# ---------------------------------------------------------------------------
# statistic laws and the chi-square harness
# ---------------------------------------------------------------------------


def _enumerate_statistic_law(statistic, n, k, bins):
    # oracle: enumerate all distinct tuples and bin the statistic
    N = 1 << n
    counts = np.zeros(bins)
    total = 0
    for t in itertools.permutations(range(N), k):
        if statistic == "hamming":
            v = bin(t[0]).count("1")
        elif statistic == "xor":
            v = (t[0] ^ t[1]) & (bins - 1)
        else:
            v = t[0] & (bins - 1)
        counts[v] += 1
        total += 1
    return counts / total


@pytest.mark.parametrize("statistic,bins", [
    ("hamming", 5), ("xor", 4), ("xor", 16), ("lowbits", 8)])
def test_statistic_laws_match_enumeration(statistic, bins):
    n, k = 4, 2
    law = statistic_law(statistic, n, k, bins)
    oracle = _enumerate_statistic_law(statistic, n, k, bins)
    assert np.abs(law - oracle).max() <= 1e-15
    assert law.sum() == pytest.approx(1.0, abs=1e-14)


def test_statistic_law_rejects_bad_requests():
    with pytest.raises(ValueError):
        statistic_law("xor", 4, 1, 4)       # needs two coordinates
    with pytest.raises(ValueError):
        statistic_law("lowbits", 4, 1, 3)   # bins must be a power of two
    with pytest.raises(ValueError):
        statistic_law("hamming", 4, 1, 4)   # needs n+1 bins


def test_sample_uniform_tuples_are_distinct():
    rng = make_rng(21)
    x = sample_uniform_tuples(3, 3, 5_000, rng)
    assert (x < 8).all()
    assert ((x[:, 0] != x[:, 1]) & (x[:, 0] != x[:, 2])
            & (x[:, 1] != x[:, 2])).all()


def test_zero_gate_circuit_rejects():
    report = kwise_stat_mc(n=6, k=2, gates=0, samples=5_000, statistic="xor",
                           seed=0, bins=16)
    assert report.rejects(0.001)


def test_uniform_sampler_passes():
    report = kwise_stat_mc(n=6, k=2, gates=0, samples=50_000, statistic="xor",
                           seed=0, bins=16, sampler="uniform")
    assert not report.rejects(0.001)


def test_moderate_circuit_passes_all_statistics():
    for statistic, bins in (("xor", 16), ("hamming", 7), ("lowbits", 8)):
        report = kwise_stat_mc(n=6, k=2, gates=400, samples=30_000,
                               statistic=statistic, seed=1, bins=bins)
        assert not report.rejects(0.001), (statistic, report.p_value)


def test_harness_is_deterministic():
    a = kwise_stat_mc(n=6, k=2, gates=50, samples=10_000, statistic="xor",
                      seed=5, bins=16)
    b = kwise_stat_mc(n=6, k=2, gates=50, samples=10_000, statistic="xor",
                      seed=5, bins=16)
    assert a == b


def test_harness_calibration_rejection_rate():
    # on truly uniform inputs the rejection rate at significance s must sit
    # within 3 sigma of s across 200 independent harness runs
    significance = 0.05
    runs = 200
    rejections = sum(
        kwise_stat_mc(n=6, k=2, gates=0, samples=2_000, statistic="xor",
                      seed=seed, bins=16, sampler="uniform").rejects(significance)
        for seed in range(runs)
    )
    sigma = math.sqrt(runs * significance * (1 - significance))
    assert abs(rejections - runs * significance) <= 3 * sigma
