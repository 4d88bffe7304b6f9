"""Numerical laboratory for locality bounds on quantum spin chains.

The package evaluates closed-form locality estimates for complex-time
evolution, audits them against exact diagonalization at desk scale, and
probes the derived objects (expansionals, transfer operators, thermal
states, tensor-network boundary states) that those estimates control.
"""

from .series import (
    DecayProfile,
    FiniteRange,
    ExponentialTail,
    Explicit,
    BoundParams,
    BoundCertificate,
    ExpansionalConstants,
    PASS_SLACK,
    build_profile,
    spread_coefficients,
    exp_weighted_sum,
    expansional_constants,
    evaluate_bound,
    surface_bound,
)
from .chain import (
    LocalOperator,
    InteractionSpec,
    assemble_hamiltonian,
    reframe_operator,
    partial_trace,
    operator_norm,
    sample_random_interaction,
)

__version__ = "0.1.0"
