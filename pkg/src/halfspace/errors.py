"""Semantic exception hierarchy for the half-space walk toolkit."""

from __future__ import annotations


class HalfSpaceError(Exception):
    """Base error for this package."""


class ParameterError(HalfSpaceError, ValueError):
    """Inputs violate a parameter-domain contract (inadmissible (alpha, beta),
    bad PMF, empty grid, ...)."""


class BoxOverflowError(HalfSpaceError):
    """Probability mass attempted to leave the configured bounding box.

    The caller must enlarge the box (or opt into the 'escape' ledger policy);
    mass is never dropped silently.
    """


class QuadratureError(HalfSpaceError):
    """Numerical quadrature did not converge to the requested accuracy.

    Carries the achieved error estimate in ``achieved``.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class RangeError(HalfSpaceError):
    """A searched quantity was not bracketed inside the admissible range."""


class FitError(HalfSpaceError):
    """Not enough data (span or count) for a requested regression/fit."""


class ResolutionError(HalfSpaceError):
    """A histogram or table is too coarse for the requested operation."""


class InsufficientSamplesError(HalfSpaceError):
    """A Monte Carlo estimate has no accepted samples to condition on."""
