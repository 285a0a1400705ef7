"""Algebraic state-space tools for deterministic and stochastic logical networks."""
from .algebra import (
    DimensionCapError,
    LogicalMatrix,
    ProbabilityVector,
    StochasticMatrix,
    delta,
    dimension_cap,
    khatri_rao,
    kron,
    power_reduce_matrix,
    projection_matrix,
    stp,
    stp_logical,
    swap_matrix,
    validate_stochastic,
)
from .consistency import (
    ConsistencyVerdict,
    HOperator,
    check_consistency_exact,
    check_consistency_sampled,
    check_corollary_matrix,
    check_structural_sufficient,
    h_apply_power,
    h_apply_reduced,
    point_consistency,
)
from .evolution import (
    FactorState,
    compare_models,
    detect_stationary,
    monte_carlo_oracle,
    simulate_deterministic,
    simulate_stochastic,
    step_conditional,
    step_deterministic,
    step_independent,
)
from .model import (
    GlobalSystem,
    NetworkModel,
    assemble,
    assemble_global,
    extract_subsystem,
    from_rule_tables,
    lift_local,
    state_decode,
    state_encode,
)

__version__ = "0.1.0"

__all__ = [
    "assemble",
    "assemble_global",
    "check_consistency_exact",
    "check_consistency_sampled",
    "check_corollary_matrix",
    "check_structural_sufficient",
    "compare_models",
    "ConsistencyVerdict",
    "delta",
    "detect_stationary",
    "dimension_cap",
    "DimensionCapError",
    "extract_subsystem",
    "FactorState",
    "from_rule_tables",
    "GlobalSystem",
    "h_apply_power",
    "h_apply_reduced",
    "HOperator",
    "khatri_rao",
    "kron",
    "lift_local",
    "LogicalMatrix",
    "monte_carlo_oracle",
    "NetworkModel",
    "point_consistency",
    "power_reduce_matrix",
    "ProbabilityVector",
    "projection_matrix",
    "simulate_deterministic",
    "simulate_stochastic",
    "state_decode",
    "state_encode",
    "step_conditional",
    "step_deterministic",
    "step_independent",
    "StochasticMatrix",
    "stp",
    "stp_logical",
    "swap_matrix",
    "validate_stochastic",
]
