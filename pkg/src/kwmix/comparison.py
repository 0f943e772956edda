"""Randomized edge-to-path map from uniform to standard recoloring moves.

A uniform-chain edge either recolors a vertex with a fresh color (also a
legal standard-chain move: the path is the edge itself) or swaps two
vertices' colors. A swap is simulated by three standard moves routed
through a uniformly random free color l': park vertex i on l', move
vertex j to i's old color, then move i to j's old color.

The congestion of this map is computed exactly: for every standard-chain
edge, the expected weighted load over all uniform-chain moves, with the
expectation over l' evaluated by exact averaging rather than sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import dirichlet_form
from .chains import ChainSpec, Kernel, build_kernel
from .core import enumerate_tuples, recolor, tuple_space_size
from .errors import InvariantViolation, check_state_cap

UNIVERSAL_CONGESTION_BOUND = 19.0  # 1 + 9*2, valid whenever k <= N/2


@dataclass(frozen=True)
class Path:
    """Edge sequence between tuple states; consecutive edges share states."""

    edges: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        if not self.edges:
            raise InvariantViolation("a path needs at least one edge")
        for (a, b), (c, _) in zip(self.edges, self.edges[1:]):
            if b != c:
                raise InvariantViolation("consecutive edges must share a state")

    @property
    def start(self) -> tuple[int, ...]:
        return self.edges[0][0]

    @property
    def end(self) -> tuple[int, ...]:
        return self.edges[-1][1]

    def __len__(self) -> int:
        return len(self.edges)


def is_cc_move(x: tuple[int, ...], y: tuple[int, ...], N: int) -> bool:
    """True iff y is reachable from x in one standard-recoloring step."""
    if x == y:
        return True
    diff = [i for i, (a, b) in enumerate(zip(x, y)) if a != b]
    if len(diff) != 1:
        return False
    i = diff[0]
    return y[i] not in x and 0 <= y[i] < N


def delta_path(
    x: tuple[int, ...],
    i: int,
    color: int,
    N: int,
    rng: np.random.Generator | None = None,
    free_color: int | None = None,
) -> Path:
    """Path of standard moves simulating the uniform move (x, x^{i,color}).

    Fresh or held-by-i colors give the single-edge path. A swap with
    vertex j needs a detour color: pass one explicitly via ``free_color``
    or let it be drawn uniformly from the colors unused in x.
    """
    k = len(x)
    if not 0 <= i < k:
        raise IndexError(f"coordinate {i} out of range for k={k}")
    if not 0 <= color < N:
        raise IndexError(f"color {color} out of range for N={N}")
    if color == x[i] or color not in x:
        return Path(edges=((x, recolor(x, i, color)),))

    j = x.index(color)
    unused = [c for c in range(N) if c not in x]
    if not unused:
        raise ValueError(f"swap case needs a free color but k={k} equals N={N}")
    if free_color is None:
        if rng is None:
            raise ValueError("swap case needs either rng or an explicit free_color")
        free_color = unused[int(rng.integers(len(unused)))]
    if free_color in x or not 0 <= free_color < N:
        raise ValueError(f"free color {free_color} is not unused in {x}")

    y = recolor(x, i, free_color)
    z = recolor(y, j, x[i])
    end = recolor(z, i, x[j])
    path = Path(edges=((x, y), (y, z), (z, end)))
    _validate_swap_path(path, x, i, color, N)
    return path


def _validate_swap_path(path: Path, x, i, color, N) -> None:
    if path.start != x or path.end != recolor(x, i, color):
        raise InvariantViolation("path endpoints do not match the simulated edge")
    for a, b in path.edges:
        if a == b or not is_cc_move(a, b, N):
            raise InvariantViolation(f"illegal standard-chain edge {(a, b)}")


@dataclass
class CongestionResult:
    k: int
    N: int
    a_delta: float
    argmax_edge: tuple[tuple[int, ...], tuple[int, ...]]
    formula_bound: float
    universal_bound: float = UNIVERSAL_CONGESTION_BOUND


def congestion_formula_bound(k: int, N: int) -> float:
    """(N-k+1)/N * (1 + 9(k-1)/(N-k)), the closed-form congestion bound."""
    if k >= N:
        raise ValueError("bound needs k < N")
    return (N - k + 1) / N * (1.0 + 9.0 * (k - 1) / (N - k))


def congestion_delta(k: int, N: int) -> CongestionResult:
    """Exact comparison constant of the path map.

    For every standard-chain edge (a, b): sum over uniform-chain moves of
    E[1{(a,b) on path} * path length] * pi~(x) P~(x, move) / (pi(a) P(a, b)),
    maximized over (a, b). Both stationary laws are uniform on the same
    space, so each term reduces to a count times (N-k+1)/N.
    """
    if not 1 <= k <= N - 1:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={N}")
    size = tuple_space_size(k, N)
    check_state_cap(size, f"congestion(k={k},N={N})")

    # load[e] accumulates E[1{e on path} * |path|] summed over all
    # (state, vertex, color) draws; each draw has uniform-chain weight
    # 1/(kN) and every path edge has standard-chain weight 1/(k(N-k+1)),
    # so the final ratio per unit load is (N-k+1)/N.
    load: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    states = tuple(enumerate_tuples(k, N))
    for x in states:
        unused = [c for c in range(N) if c not in x]
        for i in range(k):
            for color in range(N):
                if color == x[i] or color not in x:
                    edge = (x, recolor(x, i, color))
                    load[edge] = load.get(edge, 0.0) + 1.0
                    continue
                weight = 3.0 / len(unused)  # |path| = 3, l' uniform over unused
                for free_color in unused:
                    path = delta_path(x, i, color, N, free_color=free_color)
                    for edge in path.edges:
                        load[edge] = load.get(edge, 0.0) + weight

    scale = (N - k + 1) / N
    best_edge = None
    best = -math.inf
    for edge, units in load.items():
        a, b = edge
        if not is_cc_move(a, b, N):
            raise InvariantViolation(f"path used a non-edge of the standard chain: {edge}")
        # self-loop targets have k times the per-draw standard probability
        ratio = units * scale / (k if a == b else 1.0)
        if ratio > best:
            best = ratio
            best_edge = edge
    return CongestionResult(
        k=k, N=N, a_delta=best, argmax_edge=best_edge,
        formula_bound=congestion_formula_bound(k, N),
    )


def dirichlet_comparison_residual(
    f: np.ndarray,
    k: int,
    N: int,
    a_delta: float | None = None,
    ucc_kernel: Kernel | None = None,
    cc_kernel: Kernel | None = None,
) -> float:
    """max(0, E_ucc(f, f) - A * E_cc(f, f)); the comparison bound says 0.

    Pass precomputed kernels and congestion when evaluating many f."""
    if ucc_kernel is None:
        ucc_kernel = build_kernel(ChainSpec(family="ucc", k=k, ncolors=N))
    if cc_kernel is None:
        cc_kernel = build_kernel(ChainSpec(family="cc", k=k, ncolors=N))
    if a_delta is None:
        a_delta = congestion_delta(k, N).a_delta
    e_ucc = dirichlet_form(ucc_kernel, f)
    e_cc = dirichlet_form(cc_kernel, f)
    return max(0.0, e_ucc - a_delta * e_cc)
