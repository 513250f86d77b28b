"""Exception hierarchy shared by every module."""

from __future__ import annotations


class EmergeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EmergeError, ValueError):
    """A rejected input: wrong dimension, bad type, violated precondition."""


class DomainError(InputError):
    """An argument lies outside the domain of the operation."""


class MonotonicityError(InputError):
    """A sampled merging function is not coordinatewise nondecreasing.

    ``lower`` and ``upper`` are the witnessing grid points: ``lower <= upper``
    coordinatewise but ``f(lower) > f(upper)``.
    """

    def __init__(self, message, lower=None, upper=None, drop=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
        self.drop = drop


class AlignmentError(InputError):
    """A marginal atom or evaluation point is not a node of the grid."""


class FeasibilityError(InputError):
    """A separable dual does not dominate the function it should bound."""


class PreconditionError(InputError):
    """A mathematical precondition failed; ``witness`` carries the certificate."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InvalidMergingFunctionError(PreconditionError):
    """The function under test is not an e-merging function at grid scale."""


class SolverError(EmergeError):
    """The LP solver failed; ``bounds`` holds the best (lower, upper) known."""

    def __init__(self, message, bounds=None, status=None):
        super().__init__(message)
        self.bounds = bounds
        self.status = status


class ConsistencyError(EmergeError):
    """An internal post-condition failed (indicates a tolerance breach)."""
