"""Explicit sequences and sets: the irregular sequence built from random
blocks and zero padding, self-similar sets ``A^oo``, box counts and
entropy rates.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bias import ConstantBias, log_star, make_rng, sample_sequence, tower
from .errors import DomainError, StructuralError
from .gales import BetRule, SGale
from .util import Number, format_rational, parse_rational, require_prefix_set, resolve_window

__all__ = [
    "TowerSchedule", "tower", "log_star", "fast_driver", "RegularitySpec", "BlockRecord",
    "regularity_ledger", "build_regularity_prefix", "sandwich_check", "SelfSimilarSystem",
    "selfsimilar_dimension", "selfsimilar_supergale", "box_count", "box_counts",
    "box_count_bruteforce", "entropy_rate", "selfsimilar_prefix",
]


class TowerSchedule:
    """``t_0 = 1``, ``t_{j+1} = 2**t_j`` and ``log* n = min{j : t_j >= n}``."""

    max_materialized = 5

    def t(self, j: int) -> int:
        return tower(j)

    def log_star(self, n: int) -> int:
        return log_star(n)


def fast_driver(n: int) -> int:
    """``floor(log2 log2 n)``, taken as 0 at n = 1 where it is undefined."""
    L = n.bit_length() - 1  # floor(log2 n)
    return max(L.bit_length() - 1, 0)


# ---------------------------------------------------------------------------
# The alpha/beta regularity construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegularitySpec:
    alpha: Fraction
    beta: Fraction
    seed: int = 0
    schedule: str = "logstar"

    def __post_init__(self) -> None:
        a, b = parse_rational(self.alpha), parse_rational(self.beta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        if not (0 < a <= b <= 1):
            raise DomainError("need 0 < alpha <= beta <= 1")
        if self.schedule not in ("logstar", "fast"):
            raise DomainError(f"schedule must be 'logstar' or 'fast', not {self.schedule!r}")

    def driver(self, n: int) -> int:
        return log_star(n) if self.schedule == "logstar" else fast_driver(n)

    def gamma(self, n: int) -> Fraction:
        x = self.alpha if self.driver(n) % 2 else self.beta
        return (1 - x) / x

    def to_json(self) -> dict:
        return {"alpha": format_rational(self.alpha), "beta": format_rational(self.beta),
                "seed": self.seed, "schedule": self.schedule}


@dataclass(frozen=True)
class BlockRecord:
    n: int
    r_len: int
    gamma: Fraction
    k: int
    driver: int
    start: int
    end: int
    random_total: int


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def regularity_ledger(spec: RegularitySpec, blocks: int | None = None,
                      target_length: int | None = None) -> list[BlockRecord]:
    """Block structure without generating bits: either ``blocks`` blocks or
    enough blocks to cover ``target_length``."""
    if blocks is None and target_length is None:
        raise DomainError("give blocks or target_length")
    out = []
    pos = 0
    n = 0
    while True:
        if blocks is not None and n >= blocks:
            break
        if target_length is not None and pos >= target_length:
            break
        n += 1
        r_len = 2 * n - 1
        g = spec.gamma(n)
        k = _ceil_frac(r_len * g)
        out.append(BlockRecord(n, r_len, g, k, spec.driver(n), pos, pos + r_len + k, n * n))
        pos += r_len + k
    return out


def build_regularity_prefix(spec: RegularitySpec, target_length: int) -> tuple[str, list[BlockRecord]]:
    """Prefix of ``S = r_1 0^k_1 r_2 0^k_2 ...`` of the requested length.

    The blocks ``r_n`` are consecutive pieces of the fair-coin stream from
    ``sample_sequence`` under ``spec.seed``.
    """
    if target_length < 1:
        raise DomainError("target_length must be >= 1")
    ledger = regularity_ledger(spec, target_length=target_length)
    stream = sample_sequence(ConstantBias(Fraction(1, 2)), ledger[-1].random_total, spec.seed)
    parts = []
    for rec in ledger:
        first = rec.random_total - rec.r_len
        parts.append(stream[first:rec.random_total])
        parts.append("0" * rec.k)
    return "".join(parts)[:target_length], ledger


@dataclass
class SandwichReport:
    passed: bool
    blocks: int
    min_lower_margin: Fraction
    min_upper_margin: Fraction
    failures: list[str]


def sandwich_check(ledger: Sequence[BlockRecord], spec: RegularitySpec) -> SandwichReport:
    """Check block structure and ``(n-1)^2/beta <= |w| <= (n+1)^2/alpha``.

    ``|w|`` runs over both boundaries of block ``n`` (its start, where the
    partial block is empty, and its end).  Also checks ``|r_n| = 2n - 1``,
    ``|r_1 ... r_n| = n^2``, the gamma rule and ``k_n = ceil(|r_n| gamma_n)``.
    """
    fails = []
    lo_m: Fraction | None = None
    hi_m: Fraction | None = None
    pos = 0
    random_total = 0
    for i, rec in enumerate(ledger, start=1):
        n = rec.n
        if n != i:
            fails.append(f"block {i}: index {n}")
        if rec.r_len != 2 * n - 1:
            fails.append(f"block {n}: |r_n| = {rec.r_len}")
        random_total += rec.r_len
        if random_total != n * n or rec.random_total != n * n:
            fails.append(f"block {n}: |r_1...r_n| = {random_total}")
        if rec.gamma != spec.gamma(n) or rec.driver != spec.driver(n):
            fails.append(f"block {n}: gamma/parity rule violated")
        if rec.k != _ceil_frac(rec.r_len * rec.gamma):
            fails.append(f"block {n}: k_n = {rec.k}")
        if rec.start != pos or rec.end != pos + rec.r_len + rec.k:
            fails.append(f"block {n}: boundaries inconsistent")
        pos = rec.end
        low = Fraction((n - 1) ** 2) / spec.beta
        high = Fraction((n + 1) ** 2) / spec.alpha
        for length in (rec.start, rec.end):
            a, b = length - low, high - length
            lo_m = a if lo_m is None else min(lo_m, a)
            hi_m = b if hi_m is None else min(hi_m, b)
            if a < 0 or b < 0:
                fails.append(f"block {n}: |w| = {length} outside [{low}, {high}]")
    return SandwichReport(not fails, len(ledger), lo_m if lo_m is not None else Fraction(0),
                          hi_m if hi_m is not None else Fraction(0), fails)


def ledger_csv(ledger: Sequence[BlockRecord]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["n", "r_len", "gamma", "k", "driver", "start", "end"])
    for r in ledger:
        wr.writerow([r.n, r.r_len, str(r.gamma), r.k, r.driver, r.start, r.end])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Self-similar sets
# ---------------------------------------------------------------------------


class SelfSimilarSystem:
    """A finite prefix set ``A`` of nonempty strings, standing for ``A^oo``."""

    def __init__(self, strings: Iterable[str]):
        items = require_prefix_set(strings)
        if not items:
            raise DomainError("A must be nonempty")
        if "" in items:
            raise StructuralError("A may not contain the empty string")
        self.A = tuple(sorted(items, key=lambda u: (len(u), u)))

    def kraft(self, s: float) -> float:
        return float(sum(2.0 ** (-s * len(u)) for u in self.A))

    def to_json(self) -> list[str]:
        return list(self.A)


def _system(A) -> SelfSimilarSystem:
    return A if isinstance(A, SelfSimilarSystem) else SelfSimilarSystem(A)


def selfsimilar_dimension(A, tol: float = 1e-9) -> float:
    """Root of ``sum_{w in A} 2**(-s|w|) = 1`` by bisection (0 when |A| <= 1)."""
    sys_ = _system(A)
    if len(sys_.A) <= 1:
        return 0.0
    lo, hi = 0.0, math.log2(len(sys_.A)) + max(len(u) for u in sys_.A)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if sys_.kraft(mid) <= 1:
            hi = mid
        else:
            lo = mid
    return hi


class SelfSimilarRule(BetRule):
    """Betting rule of the self-similar supergale.

    The state is the part ``p`` of the prefix after its maximal composite
    prefix.  With ``W(p) = sum_{u in A, p <= u} 2**(-s(|u| - |p|))`` and
    Kraft sum ``K``, capital is ``2**(eps|w|) W(p)`` (``K`` when ``p`` is
    empty), so the bet on ``b`` is ``2**-s * W'(pb) / W(p)`` with
    ``W'(pb) = K`` when ``pb`` completes a word of ``A``.
    """

    def __init__(self, system: SelfSimilarSystem, s: float):
        self.system = system
        self.s = float(s)
        self.K = system.kraft(self.s)
        W: dict[str, float] = {}
        for u in system.A:
            for k in range(len(u)):
                W[u[:k]] = W.get(u[:k], 0.0) + 2.0 ** (-self.s * (len(u) - k))
        self.W = W
        self.words = set(system.A)
        self._scale = 2.0 ** (-self.s)

    def weight(self, p: str | None) -> float:
        if p is None:
            return 0.0
        return self.K if p == "" else self.W.get(p, 0.0)

    def start(self) -> str:
        return ""

    def split(self, p: str | None) -> tuple[float, float]:
        if p is None:
            return 0.0, 0.0
        wp = self.weight(p)
        out = []
        for b in "01":
            q = p + b
            x = self.K if q in self.words else self.W.get(q, 0.0)
            out.append(self._scale * x / wp)
        return out[0], out[1]

    def advance(self, p: str | None, bit: int) -> str | None:
        if p is None:
            return None
        q = p + str(bit)
        if q in self.words:
            return ""
        return q if q in self.W else None


def selfsimilar_supergale(A, s: float, eps: float) -> SGale:
    """``d(w) = sum_{u in A, w <= vu} 2**(eps|w|) 2**(-s(|vu| - |w|))`` at exponent ``s + eps``.

    ``v`` is the maximal composite prefix of ``w``.  ``d(lambda)`` equals the
    Kraft sum at ``s``, so at composite ``w`` capital is ``K * 2**(eps|w|)``.
    """
    sys_ = _system(A)
    if eps <= 0:
        raise DomainError("eps must be > 0")
    K = sys_.kraft(s)
    if K > 1 + 1e-12:
        raise DomainError(f"Kraft sum {K} > 1 at s = {s}")
    rule = SelfSimilarRule(sys_, s)
    return SGale(float(s) + float(eps), rule, "supergale", None, math.log2(K))


def box_counts(A, n_max: int) -> list[int]:
    """``N_n(A^oo)`` for ``n = 0..n_max``.

    A length-n prefix of ``A^oo`` splits uniquely as a concatenation of
    words of ``A`` followed by a proper prefix of some word, so
    ``N_n = sum_{p} c(n - |p|)`` over distinct proper prefixes ``p``,
    where ``c(m)`` counts concatenations of length exactly ``m``.
    """
    sys_ = _system(A)
    if n_max < 0:
        raise DomainError("n must be >= 0")
    c = [0] * (n_max + 1)
    c[0] = 1
    lengths = [len(u) for u in sys_.A]
    for m in range(1, n_max + 1):
        c[m] = sum(c[m - L] for L in lengths if L <= m)
    partial_lengths: dict[int, int] = {}
    for p in {u[:k] for u in sys_.A for k in range(len(u))}:
        partial_lengths[len(p)] = partial_lengths.get(len(p), 0) + 1
    return [sum(cnt * c[n - L] for L, cnt in partial_lengths.items() if L <= n)
            for n in range(n_max + 1)]


def box_count(A, n: int) -> int:
    return box_counts(A, n)[n]


def box_count_bruteforce(A, n: int) -> int:
    """Count length-n prefixes by expanding every concatenation (small cases only)."""
    sys_ = _system(A)
    seen = set()
    frontier = [""]
    while frontier:
        nxt = []
        for x in frontier:
            if len(x) >= n:
                seen.add(x[:n])
            else:
                nxt.extend(x + u for u in sys_.A)
        frontier = nxt
    return len(seen)


def entropy_rate(counts: Sequence[int] | Mapping[int, int],
                 window: tuple[int, int] | None = None) -> float:
    """``max log2|A_{=n}| / n`` over the window; zero counts are skipped."""
    if isinstance(counts, Mapping):
        items = dict(counts)
        n_top = max(items)
    else:
        items = dict(enumerate(counts))
        n_top = len(counts) - 1
    lo, hi = resolve_window(n_top, window)
    best = -math.inf
    for n in range(max(lo, 1), hi + 1):
        c = items.get(n, 0)
        if c > 0:
            best = max(best, math.log2(c) / n)
    return best


def selfsimilar_prefix(A, n: int, seed: int | None = None) -> str:
    """A length-n prefix of a sequence in ``A^oo``.

    With a seed, words are drawn uniformly from ``A`` by PCG64; without one
    they are taken round-robin in (length, lexicographic) order.
    """
    sys_ = _system(A)
    if n < 0:
        raise DomainError("n must be >= 0")
    parts = []
    total = 0
    rng = make_rng(seed) if seed is not None else None
    i = 0
    while total < n:
        if rng is None:
            u = sys_.A[i % len(sys_.A)]
        else:
            u = sys_.A[int(rng.integers(len(sys_.A)))]
        parts.append(u)
        total += len(u)
        i += 1
    return "".join(parts)[:n]
