"""Exact distribution evolution, mixing times, and statistical tests.

Exact experiments evolve point masses through a kernel and track total
variation to stationarity. At sizes where the tuple space is out of
reach, circuits are sampled instead and a projected statistic of the
output tuple is tested against its closed-form law under the uniform
distribution on distinct tuples (chi-square goodness of fit). The
projections keep the null law exactly computable, which raw TV over a
~2^(nk)-point support would not be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .chains import ChainSpec, Kernel, build_kernel
from .core import tuple_space_size
from .errors import check_state_cap
from .rng import split_rngs

# chains whose color-permutation symmetry makes every start equivalent
TRANSITIVE_FAMILIES = {"ucc", "cc", "complete"}

# fixed stream split for Monte Carlo work; few enough that vectorized
# chunks stay large, many enough to parcel out to workers
MC_STREAMS = 8


def validate_distribution(p: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.min() < -tol:
        raise ValueError(f"negative probability {p.min()}")
    if abs(math.fsum(p.tolist()) - 1.0) > tol:
        raise ValueError("distribution does not sum to 1")
    return p


def evolve(kernel: Kernel, start: int, t: int) -> np.ndarray:
    """Exact t-step distribution from a point mass at state `start`."""
    if t < 0:
        raise ValueError("need t >= 0")
    if not 0 <= start < kernel.size:
        raise IndexError(f"start state {start} out of range")
    pt = kernel.transpose_csr()
    p = np.zeros(kernel.size)
    p[start] = 1.0
    for _ in range(t):
        p = pt @ p
    return p


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Half the l1 distance between two aligned distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions are misaligned")
    return 0.5 * math.fsum(np.abs(p - q).tolist())


def tv_curve(kernel: Kernel, start: int, t_max: int) -> list[float]:
    """TV(p_start^t, stationary) for t = 0..t_max."""
    pt = kernel.transpose_csr()
    p = np.zeros(kernel.size)
    p[start] = 1.0
    out = [tv_distance(p, kernel.stationary)]
    for _ in range(t_max):
        p = pt @ p
        out.append(tv_distance(p, kernel.stationary))
    return out


def pointwise_relative_error(kernel: Kernel, start: int, t: int) -> float:
    """max_y |p_start^t(y) - pi(y)| / pi(y)."""
    p = evolve(kernel, start, t)
    pi = kernel.stationary
    if pi.min() <= 0:
        raise ValueError("needs a strictly positive stationary law")
    return float(np.max(np.abs(p - pi) / pi))


def mixing_time_exact(
    kernel: Kernel,
    epsilon: float,
    max_steps: int = 100_000,
    all_starts: bool | None = None,
) -> int:
    """Smallest t with max-over-starts TV(p_x^t, pi) <= epsilon.

    For chains marked transitive a single start suffices; otherwise every
    start is tracked (one dense matrix of distributions).
    """
    if not 0 < epsilon < 1:
        raise ValueError("need 0 < epsilon < 1")
    if all_starts is None:
        all_starts = kernel.meta.get("family") not in TRANSITIVE_FAMILIES
    pt = kernel.transpose_csr()
    if all_starts:
        dists = np.eye(kernel.size)
    else:
        dists = np.zeros((kernel.size, 1))
        dists[0, 0] = 1.0
    pi = kernel.stationary[:, None]
    for t in range(max_steps + 1):
        worst = float(np.max(0.5 * np.abs(dists - pi).sum(axis=0)))
        if worst <= epsilon:
            return t
        dists = pt @ dists
    raise RuntimeError(f"no mixing within {max_steps} steps (TV still {worst:.3g})")


def kwise_tv_exact(n: int, k: int, t: int, gate_mode: str = "parameter") -> float:
    """Exact approximation error of the t-gate circuit distribution:
    max over start tuples of TV(p_x^t, uniform on distinct tuples)."""
    kernel = build_kernel(ChainSpec(family="rev", k=k, n=n, gate_mode=gate_mode))
    pt = kernel.transpose_csr()
    dists = np.eye(kernel.size)
    for _ in range(t):
        dists = pt @ dists
    pi = kernel.stationary[:, None]
    return float(np.max(0.5 * np.abs(dists - pi).sum(axis=0)))


# ---------------------------------------------------------------------------
# Monte Carlo statistics of random circuits at moderate width
# ---------------------------------------------------------------------------

STATISTICS = ("hamming", "xor", "lowbits")


@dataclass
class StatTestReport:
    n: int
    k: int
    gates: int
    samples: int
    statistic: str
    bins: int
    chi2: float
    dof: int
    p_value: float
    seed: int
    gate_mode: str
    sampler: str

    def rejects(self, significance: float) -> bool:
        return self.p_value < significance


def statistic_law(statistic: str, n: int, k: int, bins: int) -> np.ndarray:
    """Exact law of the projected statistic under uniform distinct tuples."""
    N = 1 << n
    if statistic == "hamming":
        if bins != n + 1:
            raise ValueError(f"hamming weight of an {n}-bit string needs {n + 1} bins")
        # per-coordinate marginal of a uniform distinct tuple is uniform
        return np.array([math.comb(n, w) for w in range(n + 1)], dtype=float) / N
    if statistic == "xor":
        if k < 2:
            raise ValueError("xor statistic needs k >= 2")
        _check_bins(bins, N)
        # y1 ^ y2 is uniform over the N-1 nonzero strings; bucket v of the
        # low-bit reduction holds N/bins strings, minus the zero string.
        law = np.full(bins, (N // bins) / (N - 1))
        law[0] = (N // bins - 1) / (N - 1)
        return law
    if statistic == "lowbits":
        _check_bins(bins, N)
        return np.full(bins, 1.0 / bins)
    raise ValueError(f"unknown statistic {statistic!r}; pick one of {STATISTICS}")


def _check_bins(bins: int, N: int) -> None:
    if bins < 2 or bins & (bins - 1):
        raise ValueError(f"bins must be a power of two >= 2, got {bins}")
    if bins > N:
        raise ValueError(f"bins={bins} exceeds the {N}-point value range")


def _statistic_values(statistic: str, tuples: np.ndarray, n: int, bins: int) -> np.ndarray:
    if statistic == "hamming":
        return np.bitwise_count(tuples[:, 0])
    if statistic == "xor":
        return (tuples[:, 0] ^ tuples[:, 1]) & (bins - 1)
    if statistic == "lowbits":
        return tuples[:, 0] & (bins - 1)
    raise ValueError(f"unknown statistic {statistic!r}")


def _default_start(n: int, k: int) -> np.ndarray:
    # fixed distinct tuple (0, 1, ..., k-1); any fixed choice works
    return np.arange(k, dtype=np.uint64)


def sample_circuit_outputs(
    n: int, k: int, gates: int, samples: int, rng: np.random.Generator,
    start: np.ndarray | None = None,
) -> np.ndarray:
    """Apply `samples` independent random circuits to one start tuple.

    Returns a (samples, k) array of output strings. Vectorized over the
    sample axis: each step draws one parameter-uniform gate per circuit
    and applies it to all k coordinates.
    """
    if n < 3 or n > 64:
        raise ValueError(f"need 3 <= n <= 64, got {n}")
    if not 1 <= k <= (1 << n):
        raise ValueError("need 1 <= k <= 2^n")
    x = np.tile(_default_start(n, k) if start is None else
                np.asarray(start, dtype=np.uint64), (samples, 1))
    for _ in range(gates):
        target = rng.integers(0, n, size=samples, dtype=np.uint64)
        j1 = (target + 1 + rng.integers(0, n - 1, size=samples, dtype=np.uint64)) % n
        j2 = (target + 1 + rng.integers(0, n - 1, size=samples, dtype=np.uint64)) % n
        h = rng.integers(0, 16, size=samples, dtype=np.uint64)
        a = (x >> j1[:, None]) & 1
        b = (x >> j2[:, None]) & 1
        hbit = (h[:, None] >> ((a << 1) | b)) & 1
        x ^= hbit << target[:, None]
    return x


def sample_uniform_tuples(
    n: int, k: int, samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform distinct k-tuples of n-bit strings, (samples, k) array."""
    if n > 64:
        raise ValueError("vectorized sampling needs n <= 64")
    high = 1 << n
    x = rng.integers(0, high, size=(samples, k), dtype=np.uint64)
    while True:
        bad = np.zeros(samples, dtype=bool)
        for i in range(k):
            for j in range(i + 1, k):
                bad |= x[:, i] == x[:, j]
        if not bad.any():
            return x
        x[bad] = rng.integers(0, high, size=(int(bad.sum()), k), dtype=np.uint64)


def kwise_stat_mc(
    n: int,
    k: int,
    gates: int,
    samples: int,
    statistic: str = "xor",
    seed: int = 0,
    bins: int | None = None,
    gate_mode: str = "parameter",
    sampler: str = "circuit",
) -> StatTestReport:
    """Chi-square test of a projected circuit-output statistic against its
    exact law under uniform distinct tuples.

    ``sampler="uniform"`` replaces the circuits by direct uniform tuples
    (the positive control for the harness itself). Sampling is split
    over a fixed number of Philox streams for scheduler-independent
    reproducibility.
    """
    if gate_mode != "parameter":
        raise ValueError("Monte Carlo circuit sampling supports the parameter measure only")
    if sampler not in ("circuit", "uniform"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if samples < 1:
        raise ValueError("need at least one sample")
    if bins is None:
        bins = n + 1 if statistic == "hamming" else min(64, 1 << n)
    law = statistic_law(statistic, n, k, bins)

    streams = split_rngs(seed, MC_STREAMS)
    base, extra = divmod(samples, MC_STREAMS)
    counts = np.zeros(bins, dtype=np.int64)
    for ci, rng in enumerate(streams):
        chunk = base + (1 if ci < extra else 0)
        if chunk == 0:
            continue
        if sampler == "circuit":
            tuples = sample_circuit_outputs(n, k, gates, chunk, rng)
        else:
            tuples = sample_uniform_tuples(n, k, chunk, rng)
        values = _statistic_values(statistic, tuples, n, bins)
        counts += np.bincount(values.astype(np.int64), minlength=bins)

    expected = law * samples
    support = expected > 0
    chi2 = float(np.sum((counts[support] - expected[support]) ** 2 / expected[support]))
    if counts[~support].any():
        chi2 = math.inf
    dof = int(support.sum()) - 1
    p_value = float(sps.chi2.sf(chi2, dof)) if math.isfinite(chi2) else 0.0
    return StatTestReport(
        n=n, k=k, gates=gates, samples=samples, statistic=statistic, bins=bins,
        chi2=chi2, dof=dof, p_value=p_value, seed=seed, gate_mode=gate_mode,
        sampler=sampler,
    )


def empirical_step_frequencies(
    spec: ChainSpec, start: tuple[int, ...], steps: int, seed: int = 0
) -> dict[tuple[int, ...], int]:
    """Occurrences of each successor over `steps` single-step samples from
    `start`; used to cross-check step samplers against exact kernels."""
    from . import chains

    rng = split_rngs(seed, 1)[0]
    counts: dict[tuple[int, ...], int] = {}
    tables = None
    if spec.family == "rev" and spec.gate_mode == "set":
        from .core import dedupe_gates

        tables = dedupe_gates(spec.n)
    for _ in range(steps):
        if spec.family == "ucc":
            y = chains.step_ucc(start, spec.ncolors, rng)
        elif spec.family == "cc":
            y = chains.step_cc(start, spec.ncolors, rng)
        elif spec.family == "rev":
            y = chains.step_rev(start, spec.n, rng, spec.gate_mode, tables)
        elif spec.family == "tgrev":
            y = chains.step_tgrev(start, spec.partition, rng)
        else:
            raise ValueError(f"no step sampler for family {spec.family!r}")
        counts[y] = counts.get(y, 0) + 1
    return counts
