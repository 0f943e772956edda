"""Dirichlet forms, entropy, ratio search, and the entropy chain rule."""

import math

import numpy as np
import pytest
from scipy import optimize

from kwmix.analysis import (
    chain_rule_residual,
    complete_alpha_lower_bound,
    dirichlet_form,
    entropy,
    lsc_ratio,
    lsc_search,
    marginal,
    restrict_conditional,
    spectral_gap,
    ucc_alpha_lower_bound,
    verify_reversible,
)
from kwmix.chains import ChainSpec, Kernel, build_kernel, product_kernel
from kwmix.core import enumerate_tuples, tuple_index, tuple_space_size
from kwmix.rng import make_rng


@pytest.fixture(scope="module")
def ucc24():
    return build_kernel(ChainSpec(family="ucc", k=2, ncolors=4))


@pytest.fixture(scope="module")
def k2():
    return build_kernel(ChainSpec(family="complete", ncolors=2))


def test_dirichlet_constant_function_vanishes(ucc24):
    assert dirichlet_form(ucc24, np.full(ucc24.size, 3.7)) == 0.0


def test_dirichlet_two_state_closed_form(k2):
    assert dirichlet_form(k2, np.array([0.0, 1.0])) == pytest.approx(0.25, abs=1e-16)


def test_dirichlet_matches_brute_force_double_sum(ucc24):
    rng = make_rng(5)
    dense = ucc24.dense()
    pi = ucc24.stationary
    for _ in range(5):
        f = rng.random(ucc24.size)
        oracle = 0.5 * sum(
            (f[x] - f[y]) ** 2 * pi[x] * dense[x, y]
            for x in range(ucc24.size)
            for y in range(ucc24.size)
        )
        assert dirichlet_form(ucc24, f) == pytest.approx(oracle, rel=1e-13)


def test_dirichlet_rejects_misaligned(ucc24):
    with pytest.raises(ValueError):
        dirichlet_form(ucc24, np.ones(5))


def test_entropy_constant_function_vanishes():
    pi = np.full(4, 0.25)
    assert entropy(pi, np.full(4, 2.2)) == pytest.approx(0.0, abs=1e-15)


def test_entropy_two_state_closed_form():
    pi = np.full(2, 0.5)
    assert entropy(pi, np.array([2.0, 0.0])) == pytest.approx(math.log(2), rel=1e-15)


def test_entropy_nonnegative_on_random_functions():
    rng = make_rng(9)
    for _ in range(1000):
        m = int(rng.integers(2, 30))
        pi = rng.random(m) + 0.01
        pi /= pi.sum()
        f = rng.random(m) * 3
        assert entropy(pi, f) >= 0.0


def test_entropy_rejects_negative_values():
    with pytest.raises(ValueError):
        entropy(np.full(2, 0.5), np.array([1.0, -0.5]))


def test_lsc_ratio_positive_and_rejects_constant(ucc24):
    rng = make_rng(2)
    f = rng.random(ucc24.size) + 0.1
    assert lsc_ratio(ucc24, f) > 0
    with pytest.raises(ValueError):
        lsc_ratio(ucc24, np.ones(ucc24.size))


def test_two_state_search_matches_one_dimensional_oracle(k2):
    # oracle: scan f = (a, 2-a); scale invariance makes this exhaustive
    def ratio(a):
        f = np.array([a, 2.0 - a])
        return lsc_ratio(k2, f)

    grid = np.linspace(1e-9, 2 - 1e-9, 20001)
    grid = grid[np.abs(grid - 1.0) > 1e-6]
    oracle = min(ratio(a) for a in grid)
    res = optimize.minimize_scalar(ratio, bounds=(1e-12, 0.999999), method="bounded")
    oracle = min(oracle, res.fun)

    found = lsc_search(k2, restarts=40, seed=1).best_ratio
    assert found == pytest.approx(oracle, rel=1e-4)
    # the two-point uniform chain is the textbook alpha = 1/2 case
    assert oracle == pytest.approx(0.5, abs=1e-6)


def test_search_respects_complete_graph_floor():
    for N in (3, 5, 8):
        kernel = build_kernel(ChainSpec(family="complete", ncolors=N))
        best = lsc_search(kernel, restarts=60, seed=0).best_ratio
        assert best >= complete_alpha_lower_bound(N)
        assert best <= spectral_gap(kernel) / 2 + 1e-9


def test_search_respects_uniform_recoloring_floor():
    kernel = build_kernel(ChainSpec(family="ucc", k=2, ncolors=5))
    best = lsc_search(kernel, restarts=80, seed=0).best_ratio
    assert best >= ucc_alpha_lower_bound(2, 5)
    assert best <= spectral_gap(kernel) / 2 + 1e-9


def test_recurrence_direction_compatibility():
    # searched inverse constants should satisfy the one-step recurrence
    # up to search slack: both searches sit near the true constants
    s_2_6 = lsc_search(build_kernel(ChainSpec(family="ucc", k=2, ncolors=6)),
                       restarts=120, seed=0).best_ratio
    s_1_5 = lsc_search(build_kernel(ChainSpec(family="ucc", k=1, ncolors=5)),
                       restarts=120, seed=0).best_ratio
    lhs = 1.0 / s_2_6
    rhs = (6.0 / 5.0) / s_1_5 + 3.0 * math.log(6)
    assert lhs <= rhs * 1.05


def test_spectral_gap_complete_graph_is_one():
    for N in (2, 4, 9):
        kernel = build_kernel(ChainSpec(family="complete", ncolors=N))
        assert spectral_gap(kernel) == pytest.approx(1.0, abs=1e-12)


def test_spectral_gap_of_identical_product_scales():
    base = build_kernel(ChainSpec(family="ucc", k=2, ncolors=4))
    g1 = spectral_gap(base)
    for t in (2, 3):
        prod = product_kernel([base] * t)
        assert spectral_gap(prod) == pytest.approx(g1 / t, abs=1e-10)


def test_spectral_gap_ucc24_against_dense_oracle(ucc24):
    # oracle: eigensolve the dense symmetric kernel directly
    eigs = np.sort(np.linalg.eigvalsh(ucc24.dense()))
    assert spectral_gap(ucc24) == pytest.approx(1.0 - eigs[-2], abs=1e-12)


def test_spectral_gap_rejects_nonreversible():
    matrix = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    from scipy import sparse

    kernel = Kernel(matrix=sparse.csr_matrix(matrix),
                    stationary=np.full(3, 1 / 3), meta={"family": "cycle"})
    with pytest.raises(ValueError):
        spectral_gap(kernel)


def test_verify_reversible_passes_exact_chains(ucc24):
    assert verify_reversible(ucc24).max_violation == 0.0
    rev = build_kernel(ChainSpec(family="rev", k=2, n=3))
    assert verify_reversible(rev).max_violation <= 1e-12


def test_verify_reversible_flags_perturbation(ucc24):
    dense = ucc24.dense()
    i, j = np.argwhere(dense > 0)[3]
    dense[i, j] += 1e-6
    dense[i] /= dense[i].sum()
    from scipy import sparse

    bad = Kernel(matrix=sparse.csr_matrix(dense), stationary=ucc24.stationary,
                 meta={"family": "perturbed"})
    report = verify_reversible(bad)
    assert not report.passes
    assert report.max_violation > 0


# ---------------------------------------------------------------------------
# conditional restriction, marginal, chain rule
# ---------------------------------------------------------------------------


def test_restriction_and_marginal_of_constant():
    k, N = 3, 5
    f = np.full(tuple_space_size(k, N), 2.5)
    r = restrict_conditional(f, 1, 2, k, N)
    assert r.shape == (tuple_space_size(k - 1, N - 1),)
    assert np.allclose(r, 2.5, atol=0)
    assert np.allclose(marginal(f, 1, k, N), 2.5, atol=0)


def test_marginal_of_indicator_k2_n3():
    k, N = 2, 3
    f = np.zeros(tuple_space_size(k, N))
    f[tuple_index((0, 1), N)] = 1.0
    m = marginal(f, 0, k, N)
    assert m[0] == pytest.approx(0.5, abs=0)
    assert m[1] == 0.0 and m[2] == 0.0


def test_slice_sizes_by_enumeration():
    k, N = 3, 5
    expected = math.factorial(N - 1) // math.factorial(N - k)
    for i in range(k):
        for c in range(N):
            count = sum(1 for t in enumerate_tuples(k, N) if t[i] == c)
            assert count == expected


def test_restriction_indices_align_with_slice():
    # spot-check: restriction at (i, c) visits exactly the slice values
    k, N = 2, 4
    rng = make_rng(4)
    f = rng.random(tuple_space_size(k, N))
    for i in range(k):
        for c in range(N):
            r = restrict_conditional(f, i, c, k, N)
            slice_vals = sorted(f[tuple_index(t, N)]
                                for t in enumerate_tuples(k, N) if t[i] == c)
            assert sorted(r.tolist()) == pytest.approx(slice_vals)


def test_chain_rule_constant_function():
    assert chain_rule_residual(np.full(tuple_space_size(2, 4), 1.3), 0, 2, 4) \
        == pytest.approx(0.0, abs=1e-15)


def test_chain_rule_random_functions_theta_2_6():
    rng = make_rng(8)
    size = tuple_space_size(2, 6)
    pi = np.full(size, 1.0 / size)
    for _ in range(100):
        f = rng.random(size) + 0.05
        ent = entropy(pi, f)
        for i in range(2):
            assert chain_rule_residual(f, i, 2, 6) <= 1e-10 * max(ent, 1.0)


def test_chain_rule_indicator_theta_2_4():
    size = tuple_space_size(2, 4)
    f = np.zeros(size)
    f[tuple_index((2, 0), 4)] = 1.0
    for i in range(2):
        assert chain_rule_residual(f, i, 2, 4) <= 1e-12


def test_chain_rule_closed_form_indicator():
    # oracle: for an indicator of one tuple, Ent(f) = log|Theta| / |Theta|
    k, N = 2, 4
    size = tuple_space_size(k, N)
    f = np.zeros(size)
    f[tuple_index((1, 3), N)] = 1.0
    pi = np.full(size, 1.0 / size)
    assert entropy(pi, f) == pytest.approx(math.log(size) / size, rel=1e-14)
