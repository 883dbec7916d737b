"""Small helpers for bit strings, rationals and finite-horizon windows.

Bit strings are plain ``str`` objects over the alphabet ``"01"``; the empty
string plays the role of the empty word.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator, Union

from .errors import DomainError, StructuralError

Number = Union[int, float, Fraction]


def parse_rational(value: object) -> Fraction:
    """Parse ``"p/q"``, ints, decimal strings or Fractions into a Fraction.

    Floats are accepted and converted exactly (binary expansion), which is
    rarely what a user typing 0.1 wants; JSON configs should use strings.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise DomainError(f"not a rational: {value!r}")
    if isinstance(value, (int, float)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"not a rational: {value!r}") from exc
    raise DomainError(f"not a rational: {value!r}")


def format_rational(x: Number) -> str | float:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return float(x)


def check_bits(w: str) -> str:
    if not isinstance(w, str) or w.strip("01"):
        raise DomainError(f"not a bit string: {w!r}")
    return w


def all_strings(n: int) -> Iterator[str]:
    """All bit strings of length ``n`` in lexicographic order."""
    for bits in product("01", repeat=n):
        yield "".join(bits)


def strings_up_to(depth: int) -> Iterator[str]:
    for n in range(depth + 1):
        yield from all_strings(n)


def is_prefix_set(strings: Iterable[str]) -> bool:
    items = sorted(set(strings))
    return all(not b.startswith(a) for a, b in zip(items, items[1:]))


def require_prefix_set(strings: Iterable[str]) -> list[str]:
    items = [check_bits(u) for u in strings]
    if len(set(items)) != len(items):
        raise StructuralError("prefix set contains duplicates")
    ordered = sorted(items)
    for a, b in zip(ordered, ordered[1:]):
        if b.startswith(a):
            raise StructuralError(f"not a prefix set: {a!r} is a prefix of {b!r}")
    return items


def default_window(n: int) -> tuple[int, int]:
    """The finite-horizon window ``[ceil(n/2), n]`` used for liminf/limsup proxies."""
    return (n + 1) // 2, n


def resolve_window(n: int, window: tuple[int, int] | None) -> tuple[int, int]:
    if window is None:
        return default_window(n)
    lo, hi = window
    hi = min(hi, n)
    if lo < 0 or lo > hi:
        raise DomainError(f"empty window {window} for horizon {n}")
    return lo, hi


def log2_exact(x: Number) -> float:
    """``log2`` that maps zero to ``-inf`` and survives huge Fractions."""
    if x == 0:
        return -math.inf
    if x < 0:
        raise DomainError(f"log of negative value {x}")
    if isinstance(x, Fraction):
        return _log2_int(x.numerator) - _log2_int(x.denominator)
    return math.log2(x)


def _log2_int(k: int) -> float:
    shift = max(k.bit_length() - 64, 0)
    return math.log2(k >> shift) + shift
