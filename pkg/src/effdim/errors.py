"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class EffdimError(Exception):
    """Base class for errors raised by this package."""


class DomainError(EffdimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StructuralError(EffdimError, ValueError):
    """A combinatorial object (prefix set, automaton, ledger) is malformed."""


class MalformedRuleError(EffdimError, ValueError):
    """A betting rule or predictor produced a value outside [0, 1]."""


class ResourceError(EffdimError, RuntimeError):
    """A computation would exceed its declared budget."""


class NumericFailure(EffdimError, RuntimeError):
    """A numerical search did not find a feasible answer."""


class UndefinedConditionalError(EffdimError, ZeroDivisionError):
    """A conditional probability was requested at a node of zero capital."""
