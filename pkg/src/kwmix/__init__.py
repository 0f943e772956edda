"""Markov chains behind random reversible circuits and k-wise mixing.

Exact transition kernels for the gate chain, the two clique-recoloring
chains, their generic-state relatives and product compositions; the
functional-inequality toolbox (Dirichlet forms, entropy, log-Sobolev
ratio search, spectral gaps); the explicit edge-to-path comparison map
with its exact congestion; and exact plus Monte Carlo mixing
experiments. Everything is seedable and reproducible.
"""

__version__ = "0.1.0"

from .analysis import (
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
from .chains import (
    ChainSpec,
    Kernel,
    build_grev_kernel,
    build_kernel,
    build_tgrev_kernel,
    enumerate_generic_states,
    product_kernel,
    step_cc,
    step_rev,
    step_tgrev,
    step_ucc,
)
from .comparison import (
    CongestionResult,
    Path,
    congestion_delta,
    congestion_formula_bound,
    delta_path,
    dirichlet_comparison_residual,
)
from .core import (
    BitString,
    Gate,
    apply_gate,
    dedupe_gates,
    enumerate_gates,
    enumerate_tuples,
    gate_table,
    recolor,
    tuple_index,
    tuple_space_size,
    tuple_unindex,
)
from .errors import InvariantViolation, KwmixError, StateCapExceeded, state_cap
from .generic import (
    Partition,
    generic_fraction_exact,
    generic_fraction_mc,
    is_generic,
    make_partition,
    verify_tgrev_product_structure,
)
from .mixing import (
    StatTestReport,
    evolve,
    kwise_stat_mc,
    kwise_tv_exact,
    mixing_time_exact,
    pointwise_relative_error,
    tv_curve,
    tv_distance,
)
from .rng import make_rng, split_rngs
