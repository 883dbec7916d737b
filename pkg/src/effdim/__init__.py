"""Gales, supergales and finite-horizon estimators of effective dimension."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DomainError,
    EffdimError,
    MalformedRuleError,
    NumericFailure,
    ResourceError,
    StructuralError,
    UndefinedConditionalError,
)
from .gales import SGale, cover_gale, evaluate, gale_from_measure, kraft_sum, mix, scale_exponent, validate  # noqa: E402

__all__ = [
    "DomainError", "EffdimError", "MalformedRuleError", "NumericFailure", "ResourceError",
    "StructuralError", "UndefinedConditionalError", "SGale", "cover_gale", "evaluate",
    "gale_from_measure", "kraft_sum", "mix", "scale_exponent", "validate",
]
