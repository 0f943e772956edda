"""Bit strings, 3-wire reversible gates, and distinct-tuple indexing.

A gate is parameterized by a target wire, two control wires and a 4-bit
truth table h; it XORs h(control bits) into the target bit. Every such
gate is an involution and therefore a permutation of {0,1}^n.

Tuples of k pairwise-distinct values from a ground set of size N (the
common state space of the coloring chains, and of circuit states with
N = 2^n) are indexed lexicographically so kernels can address them as a
contiguous integer range.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

# Truth tables are 4-bit ints: bit (2*a + b) holds h(a, b).
H_ZERO = 0b0000
H_AND = 0b1000
H_XOR = 0b0110
H_OR = 0b1110
H_ONE = 0b1111

NUM_TRUTH_TABLES = 16


def h_eval(h: int, a: int, b: int) -> int:
    """Value of truth table h at control bits (a, b)."""
    return (h >> ((a << 1) | b)) & 1


@dataclass(frozen=True)
class BitString:
    """Fixed-length bit string. Bit i of `value` is (value >> i) & 1."""

    value: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"length must be positive, got {self.n}")
        if not 0 <= self.value < (1 << self.n):
            raise ValueError(f"value {self.value} does not fit in {self.n} bits")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BitString":
        value = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"bit {i} is {b}, expected 0 or 1")
            value |= b << i
        return cls(value, len(bits))

    def bit(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"bit index {i} out of range for length {self.n}")
        return (self.value >> i) & 1

    def to_bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.n))


@dataclass(frozen=True)
class Gate:
    """3-wire gate (target, j1, j2, h): XOR h(bit j1, bit j2) into bit target.

    j1 == j2 is allowed (h then degenerates to a 1-bit function); the
    target must differ from both controls.
    """

    target: int
    j1: int
    j2: int
    h: int

    def __post_init__(self) -> None:
        if self.target == self.j1 or self.target == self.j2:
            raise ValueError("target wire must differ from both control wires")
        if min(self.target, self.j1, self.j2) < 0:
            raise ValueError("wire indices must be nonnegative")
        if not 0 <= self.h < NUM_TRUTH_TABLES:
            raise ValueError(f"truth table must be in [0, 16), got {self.h}")


def apply_gate(x: BitString, g: Gate) -> BitString:
    """Image of x under g: bit `target` XORed with h(bit j1, bit j2)."""
    if x.n < 3:
        raise ValueError(f"gates need at least 3 wires, got n={x.n}")
    if max(g.target, g.j1, g.j2) >= x.n:
        raise IndexError(f"gate {g} addresses wires beyond length {x.n}")
    return BitString(apply_gate_to_int(x.value, g), x.n)


def apply_gate_to_int(value: int, g: Gate) -> int:
    """apply_gate on a raw integer encoding (no bounds checks)."""
    a = (value >> g.j1) & 1
    b = (value >> g.j2) & 1
    return value ^ (h_eval(g.h, a, b) << g.target)


def enumerate_gates(n: int) -> list[Gate]:
    """All gate parameter tuples for n wires, in deterministic order.

    Counts 16 * n * (n-1)^2 tuples: controls range over all wires other
    than the target, independently (so j1 == j2 appears).
    """
    if n < 3:
        raise ValueError(f"need n >= 3 wires, got {n}")
    gates = []
    for target in range(n):
        others = [j for j in range(n) if j != target]
        for j1 in others:
            for j2 in others:
                for h in range(NUM_TRUTH_TABLES):
                    gates.append(Gate(target, j1, j2, h))
    return gates


def gate_table(g: Gate, n: int) -> np.ndarray:
    """Permutation table of g acting on {0,...,2^n - 1}."""
    if n < 3:
        raise ValueError(f"need n >= 3 wires, got {n}")
    if max(g.target, g.j1, g.j2) >= n:
        raise IndexError(f"gate {g} addresses wires beyond length {n}")
    values = np.arange(1 << n, dtype=np.int64)
    a = (values >> g.j1) & 1
    b = (values >> g.j2) & 1
    hbit = (g.h >> ((a << 1) | b)) & 1
    return values ^ (hbit << g.target)


MAX_DEDUPE_WIRES = 12


def dedupe_gates(n: int) -> np.ndarray:
    """Distinct permutations of {0,1}^n induced by enumerate_gates(n).

    Returns a (count, 2^n) array of permutation tables, deduplicated by
    full action, in first-seen enumeration order. Requires n <= 12 so
    the exhaustive action fits in memory.
    """
    if n > MAX_DEDUPE_WIRES:
        raise ValueError(f"dedupe_gates needs n <= {MAX_DEDUPE_WIRES}, got {n}")
    seen: set[bytes] = set()
    tables: list[np.ndarray] = []
    for g in enumerate_gates(n):
        table = gate_table(g, n)
        key = table.astype(np.uint16).tobytes()
        if key not in seen:
            seen.add(key)
            tables.append(table)
    return np.stack(tables)


# ---------------------------------------------------------------------------
# Tuples with pairwise-distinct entries over a ground set {0,...,N-1}.
# ---------------------------------------------------------------------------


def tuple_space_size(k: int, N: int) -> int:
    """N * (N-1) * ... * (N-k+1), the number of distinct k-tuples."""
    if k < 1 or N < 1 or k > N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    size = 1
    for j in range(k):
        size *= N - j
    return size


def enumerate_tuples(k: int, N: int) -> Iterator[tuple[int, ...]]:
    """All distinct k-tuples over {0,...,N-1}, in lexicographic order."""
    if k < 1 or k > N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    return itertools.permutations(range(N), k)


def tuple_index(t: Sequence[int], N: int) -> int:
    """Lexicographic rank of a distinct tuple among all of Theta_{k,N}."""
    k = len(t)
    if k < 1 or k > N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    if len(set(t)) != k:
        raise ValueError(f"tuple entries must be distinct, got {tuple(t)}")
    rank = 0
    suffix = tuple_space_size(k, N) // N  # completions per choice at position 0
    used: list[int] = []
    for pos, v in enumerate(t):
        if not 0 <= v < N:
            raise ValueError(f"entry {v} out of range [0, {N})")
        smaller_unused = v - sum(1 for u in used if u < v)
        rank += smaller_unused * suffix
        used.append(v)
        if pos + 1 < k:
            suffix //= N - 1 - pos
    return rank


def tuple_unindex(idx: int, k: int, N: int) -> tuple[int, ...]:
    """Inverse of tuple_index: the idx-th distinct tuple in lex order."""
    size = tuple_space_size(k, N)
    if not 0 <= idx < size:
        raise ValueError(f"index {idx} out of range [0, {size})")
    available = list(range(N))
    suffix = size // N
    out = []
    for pos in range(k):
        choice, idx = divmod(idx, suffix)
        out.append(available.pop(choice))
        if pos + 1 < k:
            suffix //= N - 1 - pos
    return tuple(out)


def recolor(x: tuple[int, ...], i: int, color: int) -> tuple[int, ...]:
    """Assign `color` to coordinate i; if another coordinate already holds
    it, the two coordinates swap values. Output stays distinct."""
    k = len(x)
    if not 0 <= i < k:
        raise IndexError(f"coordinate {i} out of range for k={k}")
    if color == x[i]:
        return x
    y = list(x)
    try:
        j = x.index(color)
    except ValueError:
        y[i] = color
        return tuple(y)
    y[i], y[j] = x[j], x[i]
    return tuple(y)
