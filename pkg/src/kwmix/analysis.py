"""Functional-inequality machinery over exact kernels.

Dirichlet form, entropy, and their ratio (whose infimum over nonnegative
non-constant functions is the chain's log-Sobolev constant). Every ratio
evaluated at a valid witness is an upper bound on that constant, so a
multi-start descent that drives the ratio down is a falsification
harness for claimed lower bounds: finding a witness below a claimed
bound would disprove it, and failing to find one is evidence in favor.

Entropy and the Dirichlet form use natural log and the 0*log(0) = 0
convention; reported sums run through math.fsum so the tight acceptance
tolerances are not eaten by accumulation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import optimize

from .chains import Kernel
from .core import enumerate_tuples, tuple_index, tuple_space_size, tuple_unindex
from .rng import split_rngs


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def dirichlet_form(kernel: Kernel, f: np.ndarray) -> float:
    """(1/2) sum_{x,y} (f(x) - f(y))^2 pi(x) P(x,y)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.size,):
        raise ValueError(f"function has shape {f.shape}, kernel has {kernel.size} states")
    m = kernel.matrix.tocoo()
    diff = f[m.row] - f[m.col]
    terms = diff * diff * kernel.stationary[m.row] * m.data
    return 0.5 * _fsum(terms)


def entropy(pi: np.ndarray, f: np.ndarray) -> float:
    """sum_x pi(x) f(x) log(f(x) / E_pi[f]), natural log, 0*log(0) = 0.

    Evaluated as sum pi * (f log(f/m) - f + m), which is identical
    (the added terms sum to zero) but termwise nonnegative, so nearly
    constant f does not lose the result to cancellation across states.
    Identically-zero f is mapped to 0 by continuity.
    """
    pi = np.asarray(pi, dtype=float)
    f = np.asarray(f, dtype=float)
    if pi.shape != f.shape:
        raise ValueError("distribution and function are misaligned")
    if f.min() < 0:
        raise ValueError(f"entropy needs f >= 0, got min {f.min()}")
    mean = _fsum(pi * f)
    if mean == 0.0:
        return 0.0
    dev = f - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(f > 0, f * np.log1p(dev / mean) - dev, mean)
    return _fsum(pi * terms)


def lsc_ratio(kernel: Kernel, f: np.ndarray) -> float:
    """Dirichlet form of sqrt(f) over entropy of f; an upper bound on the
    chain's log-Sobolev constant for every valid f."""
    f = np.asarray(f, dtype=float)
    ent = entropy(kernel.stationary, f)
    if ent <= 0.0:
        raise ValueError("log-Sobolev ratio needs a non-constant f with positive entropy")
    return dirichlet_form(kernel, np.sqrt(f)) / ent


@dataclass
class SearchResult:
    best_ratio: float
    witness: np.ndarray
    restarts: int
    evaluations: int


def _symmetric_weights(kernel: Kernel):
    # W[x,y] = (pi_x P_xy + pi_y P_yx) / 2; for reversible kernels this
    # equals pi_x P_xy and leaves the Dirichlet form unchanged.
    d = kernel.matrix.multiply(kernel.stationary[:, None]).tocsr()
    w = ((d + d.T) * 0.5).tocsr()
    deg = np.asarray(w.sum(axis=1)).ravel()
    coo = w.tocoo()
    off = coo.row != coo.col
    return w, deg, coo.row[off], coo.col[off], coo.data[off]


def lsc_search(
    kernel: Kernel,
    restarts: int = 200,
    tol: float = 1e-10,
    seed: int = 0,
    threads: int = 1,
) -> SearchResult:
    """Multi-start descent minimizing the log-Sobolev ratio.

    Parameterizes f = g^2 and runs L-BFGS on g from multiplicatively
    perturbed starts (one Philox stream per restart, so the outcome does
    not depend on thread scheduling). Returns the smallest ratio found
    and its witness; the value is a certified upper bound on the
    log-Sobolev constant.
    """
    if kernel.size > 10_000:
        raise ValueError("search is limited to kernels with at most 10^4 states")
    if restarts < 1:
        raise ValueError("need at least one restart")
    w, deg, erow, ecol, eweight = _symmetric_weights(kernel)
    pi = kernel.stationary
    log = np.log

    def make_objective(tracker: list):
        # tracker holds [best_ratio, best_g, evaluations]: every evaluated
        # point is a valid witness, so keep the minimum over all of them,
        # not just L-BFGS endpoints. Energy and entropy are evaluated in
        # cancellation-free forms so near-constant g cannot produce a
        # spuriously small ratio.
        def objective(g: np.ndarray):
            tracker[2] += 1
            diff = g[erow] - g[ecol]
            energy = 0.5 * float(np.dot(diff * diff, eweight))
            g2 = g * g
            mean = float(np.dot(pi, g2))
            if mean <= 0.0:
                return np.inf, np.zeros_like(g)
            dev = g2 - mean
            with np.errstate(divide="ignore", invalid="ignore"):
                stable = np.where(g2 > 0, g2 * np.log1p(dev / mean) - dev, mean)
                logterm = np.where(g2 > 0, log(g2) - math.log(mean), 0.0)
            ent = float(np.dot(pi, stable))
            if ent < 1e-300:
                return np.inf, np.zeros_like(g)
            grad_energy = 2.0 * (deg * g - w @ g)
            grad_ent = 2.0 * pi * g * logterm
            ratio = energy / ent
            if ratio < tracker[0]:
                tracker[0] = ratio
                tracker[1] = g.copy()
            grad = (grad_energy - ratio * grad_ent) / ent
            return ratio, grad

        return objective

    def run_restart(r: int) -> tuple[float, np.ndarray, int] | None:
        rng = streams[r]
        if r % 3 == 0:
            g0 = np.exp(0.8 * rng.standard_normal(kernel.size))
        elif r % 3 == 1:
            g0 = 1.0 + 0.5 * rng.standard_normal(kernel.size)
        else:
            g0 = 0.05 + rng.random(kernel.size)
            g0[rng.integers(kernel.size)] += 3.0
        tracker: list = [np.inf, None, 0]
        optimize.minimize(
            make_objective(tracker), g0, jac=True, method="L-BFGS-B",
            options={"maxiter": 500, "ftol": tol * 1e-3, "gtol": 1e-12},
        )
        if tracker[1] is None:
            return None
        g = np.abs(tracker[1])
        f = g * g
        if entropy(pi, f) <= 1e-13:
            return None
        return lsc_ratio(kernel, f), f, tracker[2]

    streams = split_rngs(seed, restarts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_restart, range(restarts)))
    else:
        outcomes = [run_restart(r) for r in range(restarts)]

    best: tuple[float, np.ndarray] | None = None
    evaluations = 0
    for out in outcomes:
        if out is None:
            continue
        evaluations += out[2]
        if best is None or out[0] < best[0]:
            best = (out[0], out[1])
    if best is None:
        raise ValueError("every restart collapsed to a constant function")
    return SearchResult(best_ratio=best[0], witness=best[1],
                        restarts=restarts, evaluations=evaluations)


def ucc_alpha_lower_bound(k: int, N: int, log_base: float = math.e) -> float:
    """Claimed log-Sobolev floor 1 / (12 k log N) for the uniform
    recoloring chain, stated for k <= N/2. Natural log by default; the
    base is a parameter because the claim leaves it open."""
    if not 1 <= k or not k * 2 <= N:
        raise ValueError(f"bound is stated for k <= N/2, got k={k}, N={N}")
    return 1.0 / (12.0 * k * math.log(N, log_base))


def complete_alpha_lower_bound(N: int, log_base: float = math.e) -> float:
    """Known log-Sobolev floor 1 / (3 log N) for the complete graph."""
    return 1.0 / (3.0 * math.log(N, log_base))


def spectral_gap(kernel: Kernel, reversibility_tol: float = 1e-9) -> float:
    """1 - lambda_2 of the symmetrized kernel (requires reversibility)."""
    if kernel.size > 10_000:
        raise ValueError("dense eigensolve is limited to 10^4 states")
    report = verify_reversible(kernel, tol=reversibility_tol)
    if not report.passes:
        raise ValueError(
            f"kernel is not reversible (violation {report.max_violation:.3e})")
    pi = kernel.stationary
    if pi.min() <= 0:
        raise ValueError("spectral gap needs a strictly positive stationary law")
    sqrt_pi = np.sqrt(pi)
    a = kernel.dense() * (sqrt_pi[:, None] / sqrt_pi[None, :])
    a = 0.5 * (a + a.T)
    eigs = np.linalg.eigvalsh(a)
    return float(1.0 - eigs[-2])


@dataclass
class ReversibilityReport:
    max_violation: float
    passes: bool
    worst_pair: tuple[int, int]


def verify_reversible(kernel: Kernel, tol: float = 1e-12) -> ReversibilityReport:
    """Largest detailed-balance violation |pi_x P_xy - pi_y P_yx|."""
    flow = kernel.matrix.multiply(kernel.stationary[:, None]).tocoo()
    asym = (flow - flow.T).tocoo()
    if asym.nnz == 0:
        return ReversibilityReport(0.0, True, (0, 0))
    j = int(np.argmax(np.abs(asym.data)))
    violation = float(abs(asym.data[j]))
    return ReversibilityReport(violation, violation <= tol,
                               (int(asym.row[j]), int(asym.col[j])))


# ---------------------------------------------------------------------------
# Conditional restrictions, marginals, and the entropy chain rule on the
# distinct-tuple space.
# ---------------------------------------------------------------------------


def restrict_conditional(f: np.ndarray, i: int, c: int, k: int, N: int) -> np.ndarray:
    """Restriction of f to the slice {x_i = c}, re-indexed over the
    (k-1)-tuple space with color c removed (order-preserving relabeling)."""
    f = _check_tuple_function(f, k, N)
    if not 0 <= i < k:
        raise IndexError(f"coordinate {i} out of range for k={k}")
    if not 0 <= c < N:
        raise IndexError(f"color {c} out of range for N={N}")
    if k == 1:
        return np.array([f[tuple_index((c,), N)]])
    sub = tuple_space_size(k - 1, N - 1)
    out = np.empty(sub)
    for idx in range(sub):
        small = tuple_unindex(idx, k - 1, N - 1)
        lifted = tuple(v if v < c else v + 1 for v in small)
        full = lifted[:i] + (c,) + lifted[i:]
        out[idx] = f[tuple_index(full, N)]
    return out


def marginal(f: np.ndarray, i: int, k: int, N: int) -> np.ndarray:
    """F_i(c): average of f over the slice {x_i = c}, for each color c."""
    f = _check_tuple_function(f, k, N)
    if not 0 <= i < k:
        raise IndexError(f"coordinate {i} out of range for k={k}")
    sums = np.zeros(N)
    for idx, t in enumerate(enumerate_tuples(k, N)):
        sums[t[i]] += f[idx]
    slice_size = tuple_space_size(k, N) // N
    return sums / slice_size


def chain_rule_residual(f: np.ndarray, i: int, k: int, N: int) -> float:
    """|Ent(f) - E_c[Ent(f restricted to x_i=c)] - Ent(F_i)|.

    The conditional-entropy chain rule says this vanishes identically;
    anything beyond roundoff indicates a bug in the entropy machinery.
    """
    f = _check_tuple_function(f, k, N)
    size = tuple_space_size(k, N)
    pi_full = np.full(size, 1.0 / size)
    lhs = entropy(pi_full, f)

    cond_terms = []
    if k == 1:
        cond_terms = [0.0] * N
    else:
        sub = tuple_space_size(k - 1, N - 1)
        pi_sub = np.full(sub, 1.0 / sub)
        for c in range(N):
            cond_terms.append(entropy(pi_sub, restrict_conditional(f, i, c, k, N)))
    marg = marginal(f, i, k, N)
    pi_colors = np.full(N, 1.0 / N)
    rhs = math.fsum(cond_terms) / N + entropy(pi_colors, marg)
    return abs(lhs - rhs)


def _check_tuple_function(f: np.ndarray, k: int, N: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    size = tuple_space_size(k, N)
    if f.shape != (size,):
        raise ValueError(f"function has shape {f.shape}, expected ({size},)")
    return f
