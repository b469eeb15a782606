"""Exception hierarchy shared by all strata modules."""

from __future__ import annotations


class StrataError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(StrataError):
    """Matrix or vector shapes do not agree."""


class NegativeEntry(StrataError):
    """An entry is negative or non-finite where a nonnegative real is required."""


class EmptyTeam(StrataError):
    """No species, no traits, or a species with a non-positive agent count."""


class UnknownEdge(StrataError):
    """A rate was keyed on an edge that does not exist in the task graph."""


class RateAboveCeiling(StrataError):
    """A transition rate exceeds its per-species ceiling."""


class NegativeRate(StrataError):
    """A transition rate is negative."""


class NumericalFailure(StrataError):
    """A numerical routine produced non-finite or inconsistent output."""


class IndexOutOfRange(StrataError):
    """A task or trait index is outside the valid range."""


class DefectiveMatrix(StrataError):
    """A rate matrix is too close to non-diagonalizable for eigenvalue gradients."""


class BoundTooLarge(StrataError):
    """The exhaustive combination search exceeded its enumeration budget."""


class ZeroMeanTrait(StrataError):
    """A trait with nonzero demand has a zero cross-species mean."""


class ZeroTarget(StrataError):
    """The desired trait distribution is identically zero, so relative metrics are undefined."""


class ParseError(StrataError):
    """A scenario or plan file could not be parsed; the message names the field."""


class SchemaVersionMismatch(StrataError):
    """The file's schema_version is not supported by this package."""


class InvariantViolation(StrataError):
    """A structural invariant failed during validation; the message names the check."""


class InvalidScenario(StrataError):
    """Scenario pieces have inconsistent dimensions or values."""
