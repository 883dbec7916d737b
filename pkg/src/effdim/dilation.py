"""String enumeration, restriction to a language, and martingale dilation.

Strings are enumerated length-lexicographically: s_0 = "", s_1 = "0",
s_2 = "1", s_3 = "00", ...  A sequence is read as the characteristic
sequence of a language in this order, so bit ``i`` talks about ``s_i``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Sequence

from .bias import BetaMartingale, BiasSequence, FunctionBias
from .errors import DomainError
from .gales import BetRule
from .util import Number, check_bits


def index(w: str) -> int:
    """Position of ``w`` in the standard enumeration."""
    check_bits(w)
    return (1 << len(w)) - 1 + (int(w, 2) if w else 0)


def string(n: int) -> str:
    """The string ``s_n``."""
    if n < 0:
        raise DomainError("index must be >= 0")
    length = (n + 1).bit_length() - 1
    r = n + 1 - (1 << length)
    return format(r, f"0{length}b") if length else ""


def restrict(w: str, member: Callable[[int], bool]) -> str:
    """Keep bit ``i`` of ``w`` iff ``s_i`` belongs to the language."""
    check_bits(w)
    return "".join(ch for i, ch in enumerate(w) if member(i))


def g_k(x: str, k: int) -> str:
    """``0^(|x|^k) 1 x``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    check_bits(x)
    return "0" * (len(x) ** k) + "1" + x


class IncreasingMap:
    """A strictly increasing map on strings (in the standard order).

    ``n_f(n) = index(f(s_n))``.  Range membership is decided by binary
    search over inputs, which only relies on monotonicity.
    """

    def __init__(self, fn: Callable[[str], str], name: str = "f"):
        self.fn = fn
        self.name = name
        self._forward: list[int] = []

    def __call__(self, x: str) -> str:
        return self.fn(x)

    def __repr__(self) -> str:
        return f"IncreasingMap({self.name})"

    def n_f(self, n: int) -> int:
        return index(self.fn(string(n)))

    def preimage(self, m: int) -> int | None:
        """``n`` with ``n_f(n) = m``, or None if ``s_m`` is outside the range."""
        # n_f(n) >= n for a strictly increasing map, so the preimage is <= m
        lo, hi = 0, m
        while lo <= hi:
            mid = (lo + hi) // 2
            v = self.n_f(mid)
            if v == m:
                return mid
            if v < m:
                lo = mid + 1
            else:
                hi = mid - 1
        return None

    def in_range(self, m: int) -> bool:
        return self.preimage(m) is not None

    def range_positions(self, limit: int) -> list[int]:
        """All ``n_f(n) < limit`` in increasing order (forward enumeration, cached)."""
        fw = self._forward
        while not fw or fw[-1] < limit:
            fw.append(self.n_f(len(fw)))
        return fw[:bisect.bisect_left(fw, limit)]

    def check_monotone(self, max_len: int) -> list[tuple[str, str]]:
        """Adjacent pairs (in standard order, length <= max_len) that violate monotonicity."""
        bad = []
        prev = self.fn("")
        for n in range(1, (1 << (max_len + 1)) - 1):
            cur = self.fn(string(n))
            if index(cur) <= index(prev):
                bad.append((string(n - 1), string(n)))
            prev = cur
        return bad


def identity_map() -> IncreasingMap:
    return IncreasingMap(lambda x: x, "identity")


def g_map(k: int) -> IncreasingMap:
    if k < 1:
        raise DomainError("k must be >= 1")
    return IncreasingMap(lambda x: g_k(x, k), f"g_k:{k}")


def parse_map(name: str) -> IncreasingMap:
    """``"identity"`` or ``"g_k:K"``."""
    if name == "identity":
        return identity_map()
    if name.startswith("g_k:"):
        try:
            k = int(name[4:])
        except ValueError as exc:
            raise DomainError(f"bad map spec {name!r}") from exc
        return g_map(k)
    raise DomainError(f"unknown map {name!r}")


# ---------------------------------------------------------------------------
# Sparse words and restriction to range(f)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparseWord:
    """A bit string of (possibly astronomical) length given by its set of ones."""

    length: int
    ones: frozenset

    def bit(self, i: int) -> str:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return "1" if i in self.ones else "0"


def characteristic(member: Callable[[str], bool], n: int) -> str:
    """``chi_A[0..n-1]``."""
    return "".join("1" if member(string(i)) else "0" for i in range(n))


def characteristic_sparse(strings: Iterable[str], length: int) -> SparseWord:
    """``chi_A[0..length-1]`` for a finite language ``A``."""
    return SparseWord(length, frozenset(i for i in map(index, strings) if i < length))


def restrict_to_range(w: str | SparseWord, f: IncreasingMap) -> str:
    """``w`` restricted to ``range(f)``, visiting only range positions."""
    n = len(w) if isinstance(w, str) else w.length
    bit = w.__getitem__ if isinstance(w, str) else w.bit
    return "".join(bit(i) for i in f.range_positions(n))


def preimage_characteristic(strings: Iterable[str], f: IncreasingMap, n: int) -> str:
    """``chi_{f^-1(A)}[0..n-1]`` for a finite language ``A``."""
    A = set(strings)
    return "".join("1" if f(string(j)) in A else "0" for j in range(n))


# ---------------------------------------------------------------------------
# Dilation
# ---------------------------------------------------------------------------


def dilate_bias(beta: BiasSequence, f: IncreasingMap) -> BiasSequence:
    """``beta^f_n = beta_{n_f}``."""
    return FunctionBias(lambda n: beta.value(f.n_f(n)), beta.bounds,
                        schedule=f"dilated({beta.schedule},{f.name})", exact=beta.exact)


class DilatedRule(BetRule):
    """Bets of ``f^d``: the inner rule at range positions, fair odds elsewhere.

    At a position outside ``range(f)`` the rule bets ``(1 - beta_i, beta_i)``,
    which leaves capital of a beta-martingale unchanged.
    """

    def __init__(self, inner: BetRule, f: IncreasingMap, beta: BiasSequence):
        self.inner = inner
        self.f = f
        self.beta = beta
        self.exact = inner.exact and beta.exact

    def _in_range(self, i: int) -> bool:
        pos = self.f.range_positions(i + 1)
        return bool(pos) and pos[-1] == i

    def start(self) -> tuple:
        return 0, self.inner.start()

    def split(self, state: tuple) -> tuple[Number, Number]:
        i, st = state
        if self._in_range(i):
            return self.inner.split(st)
        p = self.beta.value(i)
        return 1 - p, p

    def advance(self, state: tuple, bit: int) -> tuple:
        i, st = state
        if self._in_range(i):
            st = self.inner.advance(st, bit)
        return i + 1, st


def dilate_martingale(d: BetaMartingale, f: IncreasingMap, beta: BiasSequence) -> BetaMartingale:
    """``(f^d)(w) = d(w restricted to range(f))`` as a beta-martingale.

    ``d`` must be a martingale for the dilated bias ``beta^f``.
    """
    return BetaMartingale(beta, DilatedRule(d.rule, f, beta), d.log_initial)


@dataclass
class TransferRow:
    m: int
    restricted_length: int
    inner_log: float
    dilated_log: float
    exact_equal: bool | None = None

    @property
    def equal(self) -> bool:
        if self.exact_equal is not None:
            return self.exact_equal
        return abs(self.inner_log - self.dilated_log) <= 1e-9 * max(1.0, abs(self.inner_log))


def transfer_check(d: BetaMartingale, f: IncreasingMap, beta: BiasSequence, S: str,
                   checkpoints: Sequence[int], exact: bool = False) -> list[TransferRow]:
    """Compare ``log f^d(S[:m])`` with ``log d(S[:m] restricted to range(f))``.

    With ``exact=True`` the capitals are also compared as Fractions.
    """
    fd = dilate_martingale(d, f, beta)
    outer = fd.evaluate(S).log_capitals
    rows = []
    for m in checkpoints:
        r = restrict_to_range(S[:m], f)
        inner = d.evaluate(r).log_capitals[-1]
        eq = fd.ratio_exact(S[:m]) == d.ratio_exact(r) if exact else None
        rows.append(TransferRow(m, len(r), float(inner), float(outer[m]), eq))
    return rows
