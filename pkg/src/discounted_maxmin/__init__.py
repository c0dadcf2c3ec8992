"""Discounted two-state max-min systems and a non-convergent vanishing-discount family."""

from .game_core import (
    CouplingMatrix,
    InstanceError,
    PolicyQuadruple,
    SystemInstance,
    ValuePair,
    bellman,
    coupling_matrix,
    lipschitz_bound,
    load_instance,
    payoff,
    running_cost,
)
from .solver import (
    SolveConfig,
    SolveReport,
    check_subsolution,
    check_supersolution,
    closed_form_policy_value,
    monotone_solve,
    policy_enum_solve,
    policy_value,
    residual,
    solve,
    value_iteration,
)

__version__ = "0.1.0"
