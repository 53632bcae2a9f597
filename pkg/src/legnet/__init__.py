"""LEG Net inference: minimum-information updating over small joint tables.

The public surface re-exports the pieces most callers need; the modules
hold the rest.
"""

from .cmd import Cmd, condition_binary, impose_margin, kl_divergence, marginal, update_to_marginal
from .errors import (
    ConfigError, ConvergenceError, ImpossibleEvidenceError, InfeasibleConstraintsError,
    LegNetError, NumericError, UnreachableMarginError, ValidationError,
)
from .estimation import EventConstraint, PriorConstraints, estimate_cmd, estimate_net
from .markov import BinaryBelief, TestOutput, chain, step
from .net import (
    ConvergenceReport, Leg, LegNet, consistency_error, converge, joint_extension, marginal_of,
    order_sensitivity, set_evidence, validate,
)
from .oracle import FullJoint, exact_condition, ipf_project, marginal_table

__version__ = "0.1.0"

__all__ = [
    "Cmd", "condition_binary", "impose_margin", "kl_divergence", "marginal", "update_to_marginal",
    "ConfigError", "ConvergenceError", "ImpossibleEvidenceError", "InfeasibleConstraintsError",
    "LegNetError", "NumericError", "UnreachableMarginError", "ValidationError",
    "EventConstraint", "PriorConstraints", "estimate_cmd", "estimate_net",
    "BinaryBelief", "TestOutput", "chain", "step",
    "ConvergenceReport", "Leg", "LegNet", "consistency_error", "converge", "joint_extension",
    "marginal_of", "order_sensitivity", "set_evidence", "validate",
    "FullJoint", "exact_condition", "ipf_project", "marginal_table",
]
