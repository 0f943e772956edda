"""Block partitions of the wire set and generic circuit states.

The n wires are split into p disjoint width-w blocks plus a remainder
set. A k-tuple of n-bit strings is *generic* when every pair of rows
differs inside every block (the remainder carries no constraint). The
default sizing is w = ceil(10 * (log2 k + log2 n)), p = ceil(n / (2w)),
which is far too wide for exhaustive experiments, so overrides are
accepted everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import enumerate_tuples, tuple_space_size
from .rng import split_rngs

MC_STREAMS = 64  # fixed chunking of Monte Carlo sampling, scheduler-independent


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks C_1..C_p of width w plus remainder C covering [n]."""

    n: int
    k: int
    w: int
    p: int
    blocks: tuple[tuple[int, ...], ...]
    remainder: tuple[int, ...]
    log_base: float = 2.0

    def __post_init__(self) -> None:
        covered = [pos for block in self.blocks for pos in block]
        covered += list(self.remainder)
        if sorted(covered) != list(range(self.n)):
            raise ValueError("blocks and remainder must partition the wire set")
        if len(self.blocks) != self.p:
            raise ValueError(f"expected {self.p} blocks, got {len(self.blocks)}")
        for block in self.blocks:
            if len(block) != self.w:
                raise ValueError(f"every block must have width {self.w}")

    def descriptor(self) -> dict:
        """JSON-ready description of the partition."""
        return {
            "n": self.n,
            "k": self.k,
            "w": self.w,
            "p": self.p,
            "blocks": [list(b) for b in self.blocks],
            "remainder": list(self.remainder),
            "log_base": self.log_base,
        }


def default_block_width(n: int, k: int, log_base: float = 2.0) -> int:
    return math.ceil(10.0 * (math.log(k, log_base) + math.log(n, log_base)))


def make_partition(
    n: int,
    k: int,
    w: int | None = None,
    p: int | None = None,
    log_base: float = 2.0,
) -> Partition:
    """Contiguous-block partition; default sizes unless (w, p) overridden.

    Block t covers wires [t*w, (t+1)*w); the remainder is the tail.
    """
    if n < 1 or k < 1:
        raise ValueError(f"need n, k >= 1, got n={n}, k={k}")
    override = w is not None or p is not None
    if w is None:
        w = default_block_width(n, k, log_base)
    if p is None:
        p = math.ceil(n / (2 * w))
    if p < 1 and not override:
        raise ValueError(f"default sizing produced p={p}; supply an override")
    if p < 0 or w < 1:
        raise ValueError(f"invalid override w={w}, p={p}")
    if p * w > n:
        raise ValueError(f"blocks need {p * w} wires but only {n} exist")
    blocks = tuple(tuple(range(t * w, (t + 1) * w)) for t in range(p))
    remainder = tuple(range(p * w, n))
    return Partition(n=n, k=k, w=w, p=p, blocks=blocks, remainder=remainder,
                     log_base=log_base)


def extract_block(value: int, positions: Sequence[int]) -> int:
    """Bits of `value` at `positions`, packed into an int (LSB first)."""
    out = 0
    for m, pos in enumerate(positions):
        out |= ((value >> pos) & 1) << m
    return out


def insert_block(value: int, positions: Sequence[int], block_value: int) -> int:
    """Replace the bits of `value` at `positions` with those of block_value."""
    for m, pos in enumerate(positions):
        bit = (block_value >> m) & 1
        value = (value & ~(1 << pos)) | (bit << pos)
    return value


def is_generic(state: Sequence[int], partition: Partition) -> bool:
    """True iff every pair of rows differs on every block."""
    k = len(state)
    for block in partition.blocks:
        seen = set()
        for row in state:
            seen.add(extract_block(row, block))
        if len(seen) != k:
            return False
    return True


def count_generic_states(partition: Partition) -> int:
    """|Generic| = (product over blocks of distinct k-tuples) * 2^(k * |C|)."""
    per_block = tuple_space_size(partition.k, 1 << partition.w)
    return per_block ** partition.p * (1 << (partition.k * len(partition.remainder)))


@dataclass(frozen=True)
class FractionEstimate:
    fraction: float
    wilson_low: float
    wilson_high: float
    hits: int
    samples: int
    union_bound_low: float


def union_bound_generic_fraction(partition: Partition) -> float:
    """Crude lower bound on the generic fraction: 1 - p * k^2 * 2^(1-w)."""
    return 1.0 - partition.p * partition.k**2 * 2.0 ** (1 - partition.w)


def _wilson(hits: int, samples: int, z: float = 2.5758293035489004) -> tuple[float, float]:
    # 99% two-sided normal quantile by default
    if samples == 0:
        raise ValueError("need at least one sample")
    phat = hits / samples
    denom = 1.0 + z * z / samples
    center = (phat + z * z / (2 * samples)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / samples + z * z / (4 * samples**2))
    return max(0.0, center - half), min(1.0, center + half)


def generic_fraction_mc(partition: Partition, samples: int, seed: int = 0) -> FractionEstimate:
    """Monte Carlo estimate of Pr[a uniform distinct k-tuple is generic].

    Sampling uses a fixed number of Philox streams so the estimate is
    reproducible regardless of how chunks are scheduled.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    n, k = partition.n, partition.k
    nbytes = (n + 7) // 8
    mask = (1 << n) - 1
    streams = split_rngs(seed, MC_STREAMS)
    base, extra = divmod(samples, MC_STREAMS)
    hits = 0
    for ci, rng in enumerate(streams):
        chunk = base + (1 if ci < extra else 0)
        for _ in range(chunk):
            rows: list[int] = []
            while len(rows) < k:
                v = int.from_bytes(rng.bytes(nbytes), "little") & mask
                if v not in rows:
                    rows.append(v)
            if is_generic(rows, partition):
                hits += 1
    low, high = _wilson(hits, samples)
    return FractionEstimate(
        fraction=hits / samples,
        wilson_low=low,
        wilson_high=high,
        hits=hits,
        samples=samples,
        union_bound_low=union_bound_generic_fraction(partition),
    )


def generic_fraction_exact(partition: Partition) -> Fraction:
    """Exact generic fraction by enumerating all distinct k-tuples."""
    n, k = partition.n, partition.k
    N = 1 << n
    total = tuple_space_size(k, N)
    if total > 10_000_000:
        raise ValueError(f"{total} tuples is too many to enumerate exactly")
    hits = sum(1 for t in enumerate_tuples(k, N) if is_generic(t, partition))
    return Fraction(hits, total)


@dataclass(frozen=True)
class ProductStructureReport:
    """Deviations between the product chain on generic states and its
    claimed factorization; each max_* field should be roundoff-sized."""

    max_mixture_deviation: float
    max_block_factor_deviation: float
    max_remainder_deviation: float
    gap_product: float
    gap_blocks: float
    gap_remainder: float
    gap_identity_error: float

    def passes(self, entry_tol: float = 1e-12, gap_tol: float = 1e-9) -> bool:
        return bool(
            self.max_mixture_deviation <= entry_tol
            and self.max_block_factor_deviation <= entry_tol
            and self.max_remainder_deviation <= entry_tol
            and self.gap_identity_error <= gap_tol
        )


def verify_tgrev_product_structure(partition: Partition, k: int) -> ProductStructureReport:
    """Check the factorization of the product chain on generic states.

    (a) the kernel equals the half/half mixture of the block chain and
        the remainder chain;
    (b) each block factor equals the standard recoloring kernel on
        k-tuples of block values;
    (c) the remainder chain equals the product of k*|C| lazy two-state
        kernels;
    (d) gap(product) = (1/2) * min(factor gaps).

    Needs a toy-scale partition: every kernel is built exactly.
    """
    from .analysis import spectral_gap
    from .chains import (ChainSpec, build_kernel, build_tgrev_kernel,
                         product_kernel)

    if k != partition.k:
        raise ValueError(f"partition was built for k={partition.k}, got k={k}")
    tgrev = build_tgrev_kernel(k, partition)

    cc_block = build_kernel(ChainSpec(family="cc", k=k, ncolors=1 << partition.w))
    blocks_chain = product_kernel([cc_block] * partition.p)
    lazy_bit = build_kernel(ChainSpec(family="complete", ncolors=2))
    rem_bits = k * len(partition.remainder)
    remainder_chain = product_kernel([lazy_bit] * rem_bits)
    mixture = product_kernel([blocks_chain, remainder_chain])

    # enumerate_generic_states orders states as (block digits, remainder
    # bits), exactly the product order of [blocks_chain, remainder_chain]
    max_mixture = float(np.abs(tgrev.dense() - mixture.dense()).max())

    max_block = _factor_deviation(tgrev.dense(), [cc_block.dense()] * partition.p
                                  + [lazy_bit.dense()] * rem_bits,
                                  factor_count=partition.p,
                                  weight=2.0 * partition.p,
                                  which="block")
    max_rem = _factor_deviation(tgrev.dense(), [cc_block.dense()] * partition.p
                                + [lazy_bit.dense()] * rem_bits,
                                factor_count=rem_bits,
                                weight=2.0 * rem_bits,
                                which="remainder")

    gap_product = spectral_gap(tgrev)
    gap_blocks = spectral_gap(blocks_chain)
    gap_remainder = spectral_gap(remainder_chain)
    gap_err = abs(gap_product - 0.5 * min(gap_blocks, gap_remainder))
    return ProductStructureReport(
        max_mixture_deviation=max_mixture,
        max_block_factor_deviation=max_block,
        max_remainder_deviation=max_rem,
        gap_product=gap_product,
        gap_blocks=gap_blocks,
        gap_remainder=gap_remainder,
        gap_identity_error=gap_err,
    )


def _factor_deviation(dense, factor_matrices, factor_count, weight, which):
    """Extract per-factor transition rates from the full product kernel and
    compare with the claimed factor, across every context of the other
    coordinates. Off-diagonal product entries that move factor m equal
    factor_m(s, s') / weight."""
    sizes = [m.shape[0] for m in factor_matrices]
    t = len(sizes)
    strides = [1] * t
    for i in range(t - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]
    total = dense.shape[0]

    offset = 0 if which == "block" else t - factor_count
    worst = 0.0
    for m in range(offset, offset + factor_count):
        expected = factor_matrices[m]
        size_m = sizes[m]
        for idx in range(total):
            digit = (idx // strides[m]) % size_m
            base = idx - digit * strides[m]
            for s2 in range(size_m):
                if s2 == digit:
                    continue
                got = dense[idx, base + s2 * strides[m]] * weight
                worst = max(worst, abs(got - expected[digit, s2]))
    return worst
