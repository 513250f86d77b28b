"""Merging e-values under arbitrary dependence.

Weighted averages, a transport-LP validity checker, a domination engine
that extracts dominating weights, merging rules for restricted input
classes, and brute-force oracles for small instances.
"""

__version__ = "0.1.0"

from .core import (
    Coupling,
    DiscreteDistribution,
    EValueVector,
    GridFunction,
    Weights,
    grid_sample,
    make_axis,
    structural_upper_check,
    test_to_evalue,
    weighted_merge,
)
from .domination import dominate, linear_majorant, sup_mean_constrained
from .errors import (
    EmergeError,
    InputError,
    InvalidMergingFunctionError,
    PreconditionError,
    SolverError,
)
from .transport import (
    SeparableDual,
    TransportCertificate,
    binary_adversary,
    certify_valid,
    normalize_dual,
    worst_case_expectation,
)

__all__ = [
    "Coupling",
    "DiscreteDistribution",
    "EValueVector",
    "GridFunction",
    "SeparableDual",
    "TransportCertificate",
    "Weights",
    "EmergeError",
    "InputError",
    "InvalidMergingFunctionError",
    "PreconditionError",
    "SolverError",
    "binary_adversary",
    "certify_valid",
    "dominate",
    "grid_sample",
    "linear_majorant",
    "make_axis",
    "normalize_dual",
    "structural_upper_check",
    "sup_mean_constrained",
    "test_to_evalue",
    "weighted_merge",
    "worst_case_expectation",
]
