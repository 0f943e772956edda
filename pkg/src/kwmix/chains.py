"""Step samplers and exact transition kernels for the five chains.

Families:

* ``rev``      -- k distinct n-bit strings; one uniformly random 3-wire gate
                  per step, applied to every coordinate.
* ``cc``       -- recolor a random clique vertex with one of the N-k+1
                  colors available to it (its own color included).
* ``ucc``      -- recolor a random vertex with a uniform color from all N;
                  colliding vertices swap colors.
* ``grev``     -- rev restricted to generic states, rows renormalized.
* ``tgrev``    -- product chain on generic states: lazy remainder-bit flips
                  mixed half/half with per-block recoloring.
* ``complete`` -- jump to a uniform state (the complete-graph kernel).

Kernels are stored row-sparse with probabilities accumulated as integer
draw counts divided once by the draw total, so rows sum to 1 up to a few
ulps. Gate randomness has two documented measures: ``parameter`` (uniform
over the 16 n (n-1)^2 parameter tuples, the default) and ``set`` (uniform
over the deduplicated set of induced permutations, small n only).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .core import (
    Gate,
    dedupe_gates,
    enumerate_gates,
    enumerate_tuples,
    gate_table,
    recolor,
    tuple_space_size,
)
from .errors import InvariantViolation, check_state_cap
from .generic import Partition, extract_block, insert_block

FAMILIES = ("rev", "cc", "ucc", "grev", "tgrev", "complete")
GATE_MODES = ("parameter", "set")

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ChainSpec:
    """Parameters selecting one chain instance."""

    family: str
    k: int = 1
    n: int | None = None          # wires, for rev/grev/tgrev
    ncolors: int | None = None    # N, for cc/ucc/complete
    partition: Partition | None = None
    gate_mode: str = "parameter"

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.gate_mode not in GATE_MODES:
            raise ValueError(f"unknown gate mode {self.gate_mode!r}")
        if self.family in ("cc", "ucc"):
            if self.ncolors is None or not 1 <= self.k <= self.ncolors:
                raise ValueError(f"{self.family} needs 1 <= k <= N")
        if self.family == "complete" and (self.ncolors is None or self.ncolors < 1):
            raise ValueError("complete needs N >= 1")
        if self.family in ("rev", "grev", "tgrev"):
            if self.n is None or self.n < 3:
                raise ValueError(f"{self.family} needs n >= 3")
            if not 1 <= self.k <= (1 << self.n):
                raise ValueError("need 1 <= k <= 2^n")
        if self.family in ("grev", "tgrev") and self.partition is None:
            raise ValueError(f"{self.family} needs a partition")

    def label(self) -> str:
        if self.family in ("cc", "ucc"):
            return f"{self.family}(k={self.k},N={self.ncolors})"
        if self.family == "complete":
            return f"complete(N={self.ncolors})"
        return f"{self.family}(k={self.k},n={self.n},{self.gate_mode})"


@dataclass
class Kernel:
    """Row-stochastic transition matrix with its stationary distribution."""

    matrix: sparse.csr_matrix
    stationary: np.ndarray
    meta: dict = field(default_factory=dict)
    states: tuple | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def validate(self) -> None:
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise InvariantViolation("kernel matrix must be square")
        if m.nnz and m.data.min() < 0:
            raise InvariantViolation("negative transition probability")
        row_err = np.abs(np.asarray(m.sum(axis=1)).ravel() - 1.0).max()
        if row_err > ROW_SUM_TOL:
            raise InvariantViolation(f"row sums off by {row_err:.3e}")
        if abs(self.stationary.sum() - 1.0) > ROW_SUM_TOL:
            raise InvariantViolation("stationary distribution does not sum to 1")
        if self.stationary.min() < 0:
            raise InvariantViolation("negative stationary probability")

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def transpose_csr(self) -> sparse.csr_matrix:
        return self.matrix.transpose().tocsr()


def _kernel_from_counts(
    rows: list[dict[int, int]], denom: int, stationary: np.ndarray,
    meta: dict, states: tuple | None,
) -> Kernel:
    size = len(rows)
    indptr = np.zeros(size + 1, dtype=np.int64)
    indices: list[int] = []
    data: list[float] = []
    for r, row in enumerate(rows):
        for c in sorted(row):
            indices.append(c)
            data.append(row[c] / denom)
        indptr[r + 1] = len(indices)
    matrix = sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), indptr),
        shape=(size, size),
    )
    kernel = Kernel(matrix=matrix, stationary=stationary, meta=meta, states=states)
    kernel.validate()
    return kernel


# ---------------------------------------------------------------------------
# Step samplers
# ---------------------------------------------------------------------------


def step_ucc(x: tuple[int, ...], N: int, rng: np.random.Generator) -> tuple[int, ...]:
    """One uniform-recoloring move: i ~ [k], color ~ [N], swap on collision."""
    i = int(rng.integers(len(x)))
    color = int(rng.integers(N))
    return recolor(x, i, color)


def step_cc(x: tuple[int, ...], N: int, rng: np.random.Generator) -> tuple[int, ...]:
    """One standard-recoloring move: i ~ [k], color uniform over the
    N-k+1 colors available to vertex i (its current color included)."""
    k = len(x)
    i = int(rng.integers(k))
    used = set(x)
    choices = [c for c in range(N) if c not in used]
    choices.append(x[i])
    color = choices[int(rng.integers(len(choices)))]
    return recolor(x, i, color)


def random_gate(n: int, rng: np.random.Generator) -> Gate:
    """Parameter-uniform gate: target uniform, controls uniform off-target."""
    target = int(rng.integers(n))
    j1 = (target + 1 + int(rng.integers(n - 1))) % n
    j2 = (target + 1 + int(rng.integers(n - 1))) % n
    h = int(rng.integers(16))
    return Gate(target, j1, j2, h)


def step_rev(
    x: tuple[int, ...],
    n: int,
    rng: np.random.Generator,
    gate_mode: str = "parameter",
    tables: np.ndarray | None = None,
) -> tuple[int, ...]:
    """Apply one random gate to every coordinate simultaneously.

    ``set`` mode draws uniformly from precomputed deduplicated tables
    (pass the dedupe_gates output to avoid recomputing it per step).
    """
    if gate_mode == "parameter":
        g = random_gate(n, rng)
        a_shift, b_shift, t_shift = g.j1, g.j2, g.target
        out = []
        for v in x:
            a = (v >> a_shift) & 1
            b = (v >> b_shift) & 1
            out.append(v ^ (((g.h >> ((a << 1) | b)) & 1) << t_shift))
        return tuple(out)
    if gate_mode == "set":
        if tables is None:
            tables = dedupe_gates(n)
        table = tables[int(rng.integers(len(tables)))]
        return tuple(int(table[v]) for v in x)
    raise ValueError(f"unknown gate mode {gate_mode!r}")


def step_tgrev(
    x: tuple[int, ...], partition: Partition, rng: np.random.Generator
) -> tuple[int, ...]:
    """One product-chain move on generic states.

    Half the time: hold with probability 1/2, else flip one uniformly
    random remainder bit of one row. Otherwise: pick a block and a row
    uniformly and resample that row's block value uniformly among values
    not held by any other row in that block (the current value stays
    available).
    """
    _check_tgrev_partition(partition)
    k = len(x)
    if rng.integers(2) == 0:
        if rng.integers(2) == 0:
            return x
        r = int(rng.integers(k))
        c = partition.remainder[int(rng.integers(len(partition.remainder)))]
        y = list(x)
        y[r] = x[r] ^ (1 << c)
        return tuple(y)
    ell = int(rng.integers(partition.p))
    r = int(rng.integers(k))
    block = partition.blocks[ell]
    taken = {extract_block(x[i], block) for i in range(k) if i != r}
    avail = [u for u in range(1 << partition.w) if u not in taken]
    u = avail[int(rng.integers(len(avail)))]
    y = list(x)
    y[r] = insert_block(x[r], block, u)
    return tuple(y)


def _check_tgrev_partition(partition: Partition) -> None:
    if partition.p < 1:
        raise ValueError("product chain needs at least one block")
    if not partition.remainder:
        raise ValueError("product chain needs a nonempty remainder")
    if partition.k > (1 << partition.w):
        raise ValueError("more rows than block values; no state is generic")


# ---------------------------------------------------------------------------
# Exact kernel builders
# ---------------------------------------------------------------------------


def build_kernel(spec: ChainSpec) -> Kernel:
    """Exact kernel for the requested chain. Raises StateCapExceeded when
    the state space is larger than the configured cap."""
    if spec.family == "ucc":
        return _build_ucc(spec.k, spec.ncolors)
    if spec.family == "cc":
        return _build_cc(spec.k, spec.ncolors)
    if spec.family == "complete":
        return _build_complete(spec.ncolors)
    if spec.family == "rev":
        return _build_rev(spec.k, spec.n, spec.gate_mode)
    if spec.family == "tgrev":
        return build_tgrev_kernel(spec.k, spec.partition)
    if spec.family == "grev":
        return build_grev_kernel(spec.k, spec.n, spec.partition, spec.gate_mode)
    raise ValueError(f"unknown family {spec.family!r}")


def _coloring_states(k: int, N: int, what: str):
    size = tuple_space_size(k, N)
    check_state_cap(size, what)
    states = tuple(enumerate_tuples(k, N))
    index = {s: i for i, s in enumerate(states)}
    return states, index


def _build_ucc(k: int, N: int) -> Kernel:
    states, index = _coloring_states(k, N, f"ucc(k={k},N={N})")
    size = len(states)
    rows = []
    for x in states:
        row: Counter = Counter()
        for i in range(k):
            for color in range(N):
                row[index[recolor(x, i, color)]] += 1
        rows.append(row)
    pi = np.full(size, 1.0 / size)
    meta = {"family": "ucc", "k": k, "N": N}
    return _kernel_from_counts(rows, k * N, pi, meta, states)


def _build_cc(k: int, N: int) -> Kernel:
    states, index = _coloring_states(k, N, f"cc(k={k},N={N})")
    size = len(states)
    rows = []
    for x in states:
        used = set(x)
        unused = [c for c in range(N) if c not in used]
        row: Counter = Counter()
        for i in range(k):
            for color in unused + [x[i]]:
                row[index[recolor(x, i, color)]] += 1
        rows.append(row)
    pi = np.full(size, 1.0 / size)
    meta = {"family": "cc", "k": k, "N": N}
    return _kernel_from_counts(rows, k * (N - k + 1), pi, meta, states)


def _build_complete(N: int) -> Kernel:
    check_state_cap(N * N, f"complete(N={N}) dense kernel")
    matrix = sparse.csr_matrix(np.full((N, N), 1.0 / N))
    pi = np.full(N, 1.0 / N)
    kernel = Kernel(matrix=matrix, stationary=pi,
                    meta={"family": "complete", "N": N},
                    states=tuple((c,) for c in range(N)))
    kernel.validate()
    return kernel


def _gate_tables(n: int, gate_mode: str) -> np.ndarray:
    if gate_mode == "parameter":
        return np.stack([gate_table(g, n) for g in enumerate_gates(n)])
    if gate_mode == "set":
        return dedupe_gates(n)
    raise ValueError(f"unknown gate mode {gate_mode!r}")


def _build_rev(k: int, n: int, gate_mode: str) -> Kernel:
    N = 1 << n
    states, index = _coloring_states(k, N, f"rev(k={k},n={n})")
    size = len(states)
    tables = _gate_tables(n, gate_mode)
    rows = []
    for x in states:
        row: Counter = Counter()
        arr = np.array(x)
        for table in tables:
            row[index[tuple(int(v) for v in table[arr])]] += 1
        rows.append(row)
    pi = np.full(size, 1.0 / size)
    meta = {"family": "rev", "k": k, "n": n, "gate_mode": gate_mode}
    return _kernel_from_counts(rows, len(tables), pi, meta, states)


def enumerate_generic_states(k: int, partition: Partition) -> tuple[tuple[int, ...], ...]:
    """All generic states, ordered as the product of per-block tuple
    indices (major) and remainder bits in (row, wire) order (minor)."""
    _check_partition_rows(k, partition)
    from itertools import product

    block_tuples = tuple(enumerate_tuples(k, 1 << partition.w))
    rem = partition.remainder
    size = len(block_tuples) ** partition.p * (1 << (k * len(rem)))
    check_state_cap(size, f"generic(k={k},n={partition.n})")

    rem_patterns = tuple(product((0, 1), repeat=k * len(rem))) if rem else ((),)
    states = []
    for blocks in product(block_tuples, repeat=partition.p):
        base = [0] * k
        for t, vals in enumerate(blocks):
            for r in range(k):
                base[r] = insert_block(base[r], partition.blocks[t], vals[r])
        for bits in rem_patterns:
            rows = list(base)
            for r in range(k):
                for m, pos in enumerate(rem):
                    rows[r] |= bits[r * len(rem) + m] << pos
            states.append(tuple(rows))
    return tuple(states)


def _check_partition_rows(k: int, partition: Partition) -> None:
    if k != partition.k:
        raise ValueError(f"partition was built for k={partition.k}, got k={k}")
    if k > (1 << partition.w):
        raise ValueError("more rows than block values; no state is generic")


def build_tgrev_kernel(k: int, partition: Partition) -> Kernel:
    """Exact kernel of the product chain on generic states."""
    _check_tgrev_partition(partition)
    states = enumerate_generic_states(k, partition)
    index = {s: i for i, s in enumerate(states)}
    size = len(states)
    rem = partition.remainder
    flip_denom = 4 * k * len(rem)
    block_avail = (1 << partition.w) - k + 1
    block_denom = 2 * partition.p * k * block_avail

    rows: list[dict[int, float]] = []
    for x in states:
        row: dict[int, float] = {index[x]: 0.25}
        for r in range(k):
            for pos in rem:
                y = list(x)
                y[r] = x[r] ^ (1 << pos)
                yi = index[tuple(y)]
                row[yi] = row.get(yi, 0.0) + 1.0 / flip_denom
        for t, block in enumerate(partition.blocks):
            for r in range(k):
                taken = {extract_block(x[i], block) for i in range(k) if i != r}
                for u in range(1 << partition.w):
                    if u in taken:
                        continue
                    y = list(x)
                    y[r] = insert_block(x[r], block, u)
                    yi = index[tuple(y)]
                    row[yi] = row.get(yi, 0.0) + 1.0 / block_denom
        rows.append(row)

    indptr = np.zeros(size + 1, dtype=np.int64)
    indices: list[int] = []
    data: list[float] = []
    for r, row in enumerate(rows):
        for c in sorted(row):
            indices.append(c)
            data.append(row[c])
        indptr[r + 1] = len(indices)
    matrix = sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), indptr),
        shape=(size, size),
    )
    pi = np.full(size, 1.0 / size)
    meta = {"family": "tgrev", "k": k, "n": partition.n,
            "partition": partition.descriptor()}
    kernel = Kernel(matrix=matrix, stationary=pi, meta=meta, states=states)
    kernel.validate()
    return kernel


def build_grev_kernel(
    k: int, n: int, partition: Partition, gate_mode: str = "parameter"
) -> Kernel:
    """Gate chain restricted to generic states, rows renormalized.

    The stationary distribution is found by power iteration rather than
    assumed uniform: row renormalization by the generic-successor mass
    breaks the symmetry of the unrestricted chain.
    """
    if partition.n != n:
        raise ValueError(f"partition covers n={partition.n}, chain has n={n}")
    states = enumerate_generic_states(k, partition)
    index = {s: i for i, s in enumerate(states)}
    size = len(states)
    tables = _gate_tables(n, gate_mode)

    rows = []
    for x in states:
        row: Counter = Counter()
        arr = np.array(x)
        for table in tables:
            y = tuple(int(v) for v in table[arr])
            yi = index.get(y)
            if yi is not None:
                row[yi] += 1
        total = sum(row.values())
        if total == 0:
            raise InvariantViolation(
                f"state {x} has no generic successors; restriction undefined")
        rows.append({c: cnt / total for c, cnt in row.items()})

    indptr = np.zeros(size + 1, dtype=np.int64)
    indices: list[int] = []
    data: list[float] = []
    for r, row in enumerate(rows):
        for c in sorted(row):
            indices.append(c)
            data.append(row[c])
        indptr[r + 1] = len(indices)
    matrix = sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), indptr),
        shape=(size, size),
    )
    pi = _power_iteration_stationary(matrix)
    meta = {"family": "grev", "k": k, "n": n, "gate_mode": gate_mode,
            "partition": partition.descriptor()}
    kernel = Kernel(matrix=matrix, stationary=pi, meta=meta, states=states)
    kernel.validate()
    return kernel


def _power_iteration_stationary(
    matrix: sparse.csr_matrix, tol: float = 1e-15, max_iter: int = 200_000
) -> np.ndarray:
    size = matrix.shape[0]
    pt = matrix.transpose().tocsr()
    pi = np.full(size, 1.0 / size)
    for _ in range(max_iter):
        nxt = pt @ pi
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            pi = nxt
            break
        pi = nxt
    residual = np.abs(pt @ pi - pi).max()
    if residual > 1e-10:
        raise InvariantViolation(f"power iteration did not converge: {residual:.3e}")
    return pi


def product_kernel(factors: Sequence[Kernel]) -> Kernel:
    """Uniform mixture of single-factor moves on the product state space."""
    if not factors:
        raise ValueError("need at least one factor")
    t = len(factors)
    sizes = [f.size for f in factors]
    total = 1
    for s in sizes:
        total *= s
    check_state_cap(total, "product chain")

    strides = [1] * t
    for i in range(t - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]

    csr = [f.matrix for f in factors]
    rows: list[dict[int, float]] = []
    digits = [0] * t
    for idx in range(total):
        rem = idx
        for i in range(t):
            digits[i], rem = divmod(rem, strides[i])
        row: dict[int, float] = {}
        for i in range(t):
            m = csr[i]
            s = digits[i]
            base = idx - s * strides[i]
            for ptr in range(m.indptr[s], m.indptr[s + 1]):
                col = base + int(m.indices[ptr]) * strides[i]
                row[col] = row.get(col, 0.0) + m.data[ptr] / t
        rows.append(row)

    indptr = np.zeros(total + 1, dtype=np.int64)
    indices: list[int] = []
    data: list[float] = []
    for r, row in enumerate(rows):
        for c in sorted(row):
            indices.append(c)
            data.append(row[c])
        indptr[r + 1] = len(indices)
    matrix = sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), indptr),
        shape=(total, total),
    )
    pi = factors[0].stationary
    for f in factors[1:]:
        pi = np.outer(pi, f.stationary).ravel()
    meta = {"family": "product", "factors": [f.meta for f in factors]}
    kernel = Kernel(matrix=matrix, stationary=pi, meta=meta)
    kernel.validate()
    return kernel
