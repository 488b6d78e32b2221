"""Exception hierarchy.

Two families matter to the command line: ``ValidationError`` (bad input,
exit code 1) and ``HetlabRuntimeError`` (numerics or simulation could not
deliver, exit code 2).
"""

from __future__ import annotations


class HetlabError(Exception):
    """Base class for all package errors."""


class ValidationError(HetlabError, ValueError):
    """Input violates a documented invariant."""


class ParseError(ValidationError):
    """Input file is missing or malformed."""


class DomainError(ValidationError):
    """Numerical argument outside the domain of a formula."""


class KappaUndefined(ValidationError):
    """The exponent sequence never reaches 1 before the last saddle."""


class RegimeError(ValidationError):
    """Quantity requested outside the regime where it is defined."""


class GeometryError(ValidationError):
    """Exit recorded on a face that does not continue the chain."""


class UnstableCycle(ValidationError):
    """Cycle exponents decay to zero, so no limit measure exists."""


class HetlabRuntimeError(HetlabError, RuntimeError):
    """Computation failed for numerical or statistical reasons."""


class QuadratureError(HetlabRuntimeError):
    """Numerical integration did not converge."""


class SimulationTimeout(HetlabRuntimeError):
    """A path did not leave its domain before the time budget ran out."""


class AllTimeout(HetlabRuntimeError):
    """Every simulated path timed out."""


class InsufficientData(HetlabRuntimeError):
    """Too few usable events for the requested statistic."""


class InsufficientEscapes(InsufficientData):
    """Too few escape events to condition on."""
