"""Exception types shared across the package."""

from __future__ import annotations


class AngelsurfError(Exception):
    """Base class for all errors raised by this package."""


class NonIntegrable(AngelsurfError):
    """An endpoint exponent is <= -1, so the segment integral diverges."""


class InteriorSingularity(AngelsurfError):
    """A singular point lies strictly inside an integration segment, or two
    singular points are too close to resolve."""


class BranchAmbiguity(AngelsurfError):
    """A path waypoint coincides with a singular point, so argument
    continuation is undefined there."""


class NoConvergence(AngelsurfError):
    """An iterative solver hit its budget before reaching tolerance.

    Attributes carry the best iterate so callers can salvage or diagnose.
    """

    def __init__(self, message, best=None, residual=None, landscape=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.landscape = landscape


class NonIntegrableVertex(AngelsurfError):
    """Evaluation requested at a vertex whose local exponent is <= -1."""


class DegenerateTarget(AngelsurfError):
    """Target edge lengths span too many orders of magnitude to solve."""


class ParityViolation(AngelsurfError):
    """Vertex-data sums a_j + b_j must all be even for the square root of
    the product form to be single valued."""


class MismatchedPolygons(AngelsurfError):
    """Two orthodisks that must share vertices and marked vertices do not."""


class DivisorMismatch(AngelsurfError):
    """The zeros of the one-form do not match zeros plus poles of the
    Gauss map."""


class PeriodLeak(AngelsurfError):
    """Two integration paths to the same mesh point disagree, meaning the
    period conditions are not satisfied at the requested tolerance."""

    def __init__(self, message, leak=None):
        super().__init__(message)
        self.leak = leak


class DomainError(AngelsurfError):
    """An argument is outside the mathematical domain of the operation."""
