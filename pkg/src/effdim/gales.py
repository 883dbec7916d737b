"""s-gales, s-supergales and martingales.

A gale is stored as an exponent ``s``, an initial capital and a *betting
rule*: the fraction of current capital placed on each possible next bit.
Capital then evolves as ``d(wb) = 2**s * d(w) * bet(w, b)``, so the gale
condition ``d(w) >= 2**-s * (d(w0) + d(w1))`` reduces to
``bet(w, 0) + bet(w, 1) <= 1`` wherever ``d(w) > 0`` (with equality for a
gale).  That reduction is what makes exact validation possible for any
exponent: the factor ``2**s`` cancels and only rational bets remain.

Betting rules are written as small automata (``start`` / ``split`` /
``advance``) so that long prefixes are evaluated in one left-to-right pass
and validation can walk the full binary tree without recomputing prefixes.
Capital along a prefix is always reported in log2 units.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .errors import DomainError, MalformedRuleError, StructuralError
from .util import (
    Number,
    check_bits,
    format_rational,
    log2_exact,
    parse_rational,
    require_prefix_set,
    resolve_window,
)

HALF = Fraction(1, 2)
DEFAULT_TOL = 1e-9


# ---------------------------------------------------------------------------
# Betting rules
# ---------------------------------------------------------------------------


class BetRule:
    """Deterministic betting rule, evaluated as an automaton over prefixes.

    Subclasses implement ``start``, ``split`` and ``advance``.  ``split``
    returns ``(bet(w, 0), bet(w, 1))`` for the prefix ``w`` that led to the
    given state.  Rules flagged ``exact`` return Fractions.
    """

    exact: bool = False
    depth: int | None = None

    def start(self) -> Hashable:
        raise NotImplementedError

    def split(self, state: Any) -> tuple[Number, Number]:
        raise NotImplementedError

    def advance(self, state: Any, bit: int) -> Any:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")

    # -- derived helpers ---------------------------------------------------

    def state_at(self, w: str) -> Any:
        st = self.start()
        for ch in w:
            st = self.advance(st, 1 if ch == "1" else 0)
        return st

    def bet(self, w: str, b: int) -> Number:
        return self.split(self.state_at(w))[b]

    def log_bets(self, w: str) -> np.ndarray:
        """log2 of the bet placed on each realized bit of ``w``."""
        out = np.empty(len(w), dtype=float)
        st = self.start()
        for i, ch in enumerate(w):
            b = 1 if ch == "1" else 0
            x = self.split(st)[b]
            if not 0 <= x <= 1:
                raise MalformedRuleError(f"bet {x!r} outside [0, 1] at position {i}")
            out[i] = log2_exact(x)
            st = self.advance(st, b)
        return out


class ConstantRule(BetRule):
    """Bet the same fractions ``(p0, p1)`` at every node."""

    def __init__(self, p0: object, p1: object | None = None):
        self.p0 = _as_bet(p0)
        self.p1 = _complement(self.p0) if p1 is None else _as_bet(p1)
        self.exact = isinstance(self.p0, Fraction) and isinstance(self.p1, Fraction)

    def start(self) -> None:
        return None

    def split(self, state: Any) -> tuple[Number, Number]:
        return self.p0, self.p1

    def advance(self, state: Any, bit: int) -> None:
        return None

    def log_bets(self, w: str) -> np.ndarray:
        _check_unit(self.p0), _check_unit(self.p1)
        ones = np.frombuffer(w.encode(), dtype=np.uint8) == ord("1")
        with np.errstate(divide="ignore"):
            return np.where(ones, math.log2(self.p1) if self.p1 else -np.inf,
                            math.log2(self.p0) if self.p0 else -np.inf)

    def to_json(self) -> dict:
        return {"type": "constant", "p0": format_rational(self.p0),
                "p1": format_rational(self.p1)}


class MeasureRule(BetRule):
    """Bet ``(1 - beta_i, beta_i)`` at depth ``i`` for a bias sequence."""

    def __init__(self, beta: Any):
        self.beta = beta
        self.exact = bool(getattr(beta, "exact", False))
        self.depth = getattr(beta, "length", None)

    def start(self) -> int:
        return 0

    def split(self, i: int) -> tuple[Number, Number]:
        p = self.beta.value(i)
        return 1 - p, p

    def advance(self, i: int, bit: int) -> int:
        return i + 1

    def log_bets(self, w: str) -> np.ndarray:
        p1 = self.beta.values(len(w))
        ones = np.frombuffer(w.encode(), dtype=np.uint8) == ord("1")
        with np.errstate(divide="ignore"):
            return np.log2(np.where(ones, p1, 1.0 - p1))

    def to_json(self) -> dict:
        return {"type": "measure", "beta": self.beta.to_json()}


class TableRule(BetRule):
    """Explicit bets per prefix; prefixes absent from the table use ``default``."""

    def __init__(self, table: dict[str, Sequence[object] | object],
                 default: Sequence[object] | object = HALF, depth: int | None = None):
        self.table = {check_bits(w): _pair(v) for w, v in table.items()}
        self.default = _pair(default)
        self.maxlen = max((len(w) for w in self.table), default=-1)
        self.depth = depth
        self.exact = all(isinstance(x, Fraction)
                         for pair in [*self.table.values(), self.default] for x in pair)

    def start(self) -> str | None:
        return "" if self.maxlen >= 0 else None

    def split(self, w: str | None) -> tuple[Number, Number]:
        if w is None:
            return self.default
        return self.table.get(w, self.default)

    def advance(self, w: str | None, bit: int) -> str | None:
        if w is None or len(w) >= self.maxlen:
            return None
        return w + ("1" if bit else "0")

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "type": "table",
            "bets": {w: [format_rational(a), format_rational(b)]
                     for w, (a, b) in sorted(self.table.items())},
            "default": [format_rational(x) for x in self.default],
        }
        if self.depth is not None:
            out["depth"] = self.depth
        return out


class CoverRule(BetRule):
    """Betting rule of the cover gale built from a set of equal-length strings.

    Up to depth ``n`` the rule bets in proportion to how many strings of the
    set extend each child; beyond depth ``n`` it bets evenly.
    """

    def __init__(self, strings: Iterable[str]):
        items = [check_bits(a) for a in strings]
        if not items:
            raise DomainError("cover set must be nonempty")
        lengths = {len(a) for a in items}
        if len(lengths) != 1:
            raise StructuralError(f"cover set mixes lengths {sorted(lengths)}")
        if len(set(items)) != len(items):
            raise StructuralError("cover set contains duplicates")
        self.strings = sorted(items)
        self.n = lengths.pop()
        counts: dict[str, int] = {}
        for a in self.strings:
            for k in range(self.n + 1):
                counts[a[:k]] = counts.get(a[:k], 0) + 1
        self.counts = counts
        self.exact = True

    def start(self) -> str | None:
        return "" if self.n > 0 else None

    def split(self, w: str | None) -> tuple[Number, Number]:
        if w is None:
            return HALF, HALF
        total = self.counts.get(w, 0)
        if total == 0:
            return HALF, HALF
        return (Fraction(self.counts.get(w + "0", 0), total),
                Fraction(self.counts.get(w + "1", 0), total))

    def advance(self, w: str | None, bit: int) -> str | None:
        if w is None or len(w) + 1 >= self.n:
            return None
        return w + ("1" if bit else "0")

    def count(self, w: str) -> int:
        return self.counts.get(w, 0)

    def to_json(self) -> dict:
        return {"type": "cover", "A": list(self.strings)}


class MixtureRule(BetRule):
    """Bets of a capital-weighted combination of rules.

    ``coefficients[k]`` is the weight times the initial capital of the k-th
    component; the state carries each component's share of total capital.
    """

    def __init__(self, rules: Sequence[BetRule], coefficients: Sequence[Number]):
        if not rules:
            raise DomainError("mixture needs at least one component")
        if len(rules) != len(coefficients):
            raise DomainError("one coefficient per component")
        self.rules = tuple(rules)
        self.coefficients = tuple(coefficients)
        if any(c < 0 for c in self.coefficients):
            raise DomainError("mixture coefficients must be nonnegative")
        self.exact = all(r.exact for r in self.rules) and all(
            isinstance(c, (int, Fraction)) for c in self.coefficients)
        depths = [r.depth for r in self.rules if r.depth is not None]
        self.depth = min(depths) if depths else None
        total = sum(self.coefficients)
        if total == 0:
            raise DomainError("mixture has zero total capital")
        if self.exact:
            self._shares = tuple(Fraction(c) / total for c in self.coefficients)
        else:
            self._shares = tuple(float(c) / float(total) for c in self.coefficients)

    def start(self) -> tuple:
        return tuple(r.start() for r in self.rules), self._shares

    def split(self, state: tuple) -> tuple[Number, Number]:
        states, shares = state
        p0 = p1 = 0
        for rule, st, m in zip(self.rules, states, shares):
            if m:
                a, b = rule.split(st)
                p0 += m * a
                p1 += m * b
        return p0, p1

    def advance(self, state: tuple, bit: int) -> tuple:
        states, shares = state
        weighted = []
        for rule, st, m in zip(self.rules, states, shares):
            weighted.append(m * rule.split(st)[bit] if m else 0)
        total = sum(weighted)
        if total:
            shares = tuple(x / total for x in weighted)
        return tuple(r.advance(st, bit) for r, st in zip(self.rules, states)), shares


def _as_bet(x: object) -> Number:
    if isinstance(x, (float, Fraction)):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    return parse_rational(x)


def _complement(p: Number) -> Number:
    return 1 - p


def _pair(v: Sequence[object] | object) -> tuple[Number, Number]:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise DomainError(f"bet pair must have two entries: {v!r}")
        return _as_bet(v[0]), _as_bet(v[1])
    p0 = _as_bet(v)
    return p0, 1 - p0


def _check_unit(x: Number) -> None:
    if not 0 <= x <= 1:
        raise MalformedRuleError(f"bet {x!r} outside [0, 1]")


# ---------------------------------------------------------------------------
# Gales
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SGale:
    """An s-gale (or s-supergale) given by exponent, rule and initial capital.

    ``initial`` is the exact initial capital when it is rational; otherwise
    only ``log_initial`` is meaningful.
    """

    s: Number
    rule: BetRule
    kind: str = "gale"
    initial: Fraction | None = Fraction(1)
    log_initial: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("gale", "supergale"):
            raise DomainError(f"kind must be 'gale' or 'supergale', not {self.kind!r}")
        if self.s < 0:
            raise DomainError(f"negative exponent {self.s}")
        if self.initial is not None:
            if self.initial < 0:
                raise DomainError("initial capital must be nonnegative")
            object.__setattr__(self, "initial", Fraction(self.initial))
            if self.log_initial is None:
                object.__setattr__(self, "log_initial", log2_exact(self.initial))
        elif self.log_initial is None:
            raise DomainError("either initial or log_initial is required")

    def log_capital(self, w: str) -> float:
        """log2 d(w)."""
        return float(evaluate(self, w).log_capitals[-1])

    def scaled_capital(self, w: str) -> Fraction:
        """Exact ``d(w) * 2**(-s|w|)``, available when rule and initial are exact."""
        if not (self.rule.exact and self.initial is not None):
            raise DomainError("exact capital needs an exact rule and rational initial capital")
        m = self.initial
        st = self.rule.start()
        for ch in w:
            b = 1 if ch == "1" else 0
            m *= self.rule.split(st)[b]
            st = self.rule.advance(st, b)
        return m

    def capital(self, w: str) -> float:
        return 2.0 ** self.log_capital(w)


@dataclass
class EvaluationTrace:
    """log2 capital along a prefix plus finite-horizon success statistics.

    ``lower_exponent`` / ``upper_exponent`` are the min / max over the window
    of ``log2 d(S[0..n-1]) / n`` (positions with ``n = 0`` are skipped).
    """

    prefix: str
    log_capitals: np.ndarray
    window: tuple[int, int]
    max_log: float
    tail_min_log: float
    lower_exponent: float
    upper_exponent: float

    @property
    def n(self) -> int:
        return len(self.prefix)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "log_capital"])
        for n, v in enumerate(self.log_capitals):
            writer.writerow([n, repr(float(v))])
        return buf.getvalue()


def trace_from_log_capitals(prefix: str, log_capitals: np.ndarray,
                            window: tuple[int, int] | None = None) -> EvaluationTrace:
    n = len(log_capitals) - 1
    lo, hi = resolve_window(n, window)
    seg = log_capitals[lo:hi + 1]
    idx = np.arange(max(lo, 1), hi + 1)
    if len(idx):
        rates = log_capitals[idx] / idx
        lower, upper = float(rates.min()), float(rates.max())
    else:
        lower = upper = math.nan
    return EvaluationTrace(prefix, log_capitals, (lo, hi), float(seg.max()),
                           float(seg.min()), lower, upper)


def evaluate(g: SGale, prefix: str, window: tuple[int, int] | None = None) -> EvaluationTrace:
    """log2 capital of ``g`` at every prefix of ``prefix`` (lengths 0..N)."""
    check_bits(prefix)
    depth = g.rule.depth
    if depth is not None and len(prefix) > depth:
        raise DomainError(f"prefix length {len(prefix)} exceeds rule depth {depth}")
    steps = g.rule.log_bets(prefix)
    lc = np.empty(len(prefix) + 1, dtype=float)
    lc[0] = g.log_initial
    with np.errstate(invalid="ignore"):
        lc[1:] = g.log_initial + np.cumsum(steps) + float(g.s) * np.arange(1, len(prefix) + 1)
    # -inf + finite stays -inf; guard NaN from (-inf) + (+inf) never arises
    lc[np.isnan(lc)] = -np.inf
    return trace_from_log_capitals(prefix, lc, window)


# ---------------------------------------------------------------------------
# Validation and Kraft sums
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    passed: bool
    kind: str
    depth: int
    nodes: int
    mode: str
    tolerance: float
    worst_node: str | None
    worst_relative: float
    worst_capital: float
    bad_bets: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "kind": self.kind, "depth": self.depth,
            "nodes": self.nodes, "mode": self.mode, "tolerance": self.tolerance,
            "worst_node": self.worst_node, "worst_relative": self.worst_relative,
            "worst_capital": self.worst_capital, "bad_bets": self.bad_bets,
        }


def _resolve_mode(g: SGale, mode: str) -> str:
    if mode == "auto":
        return "exact" if g.rule.exact else "float"
    if mode == "exact" and not g.rule.exact:
        raise DomainError("exact validation requires a rule with rational bets")
    if mode not in ("exact", "float"):
        raise DomainError(f"unknown mode {mode!r}")
    return mode


def validate(g: SGale, depth: int, mode: str = "auto", tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check the gale condition at every node of length ``< depth``.

    A node's excess is ``2**-s * (d(w0) + d(w1)) - d(w) = d(w) * (bet0 + bet1 - 1)``.
    Gales need zero excess, supergales nonpositive excess; float mode allows
    ``tol`` relative to ``d(w)``.
    """
    if depth < 0:
        raise DomainError("depth must be >= 0")
    if g.rule.depth is not None and depth > g.rule.depth:
        raise DomainError(f"validation depth {depth} exceeds rule depth {g.rule.depth}")
    mode = _resolve_mode(g, mode)
    exact = mode == "exact"
    s = float(g.s)
    rule = g.rule
    worst_rel: Number = 0
    worst_node: str | None = None
    worst_cap = 0.0
    passed = True
    bad: list[str] = []
    nodes = 0
    # stack items: (w, state, log2 d(w))
    stack: list[tuple[str, Any, float]] = [("", rule.start(), g.log_initial)]
    while stack:
        w, st, logd = stack.pop()
        if len(w) >= depth:
            continue
        nodes += 1
        p0, p1 = rule.split(st)
        for b, p in ((0, p0), (1, p1)):
            if not 0 <= p <= 1:
                passed = False
                bad.append(f"{w}:{b}")
        rel = (p0 + p1) - 1
        if logd != -math.inf:
            ok = (rel == 0 if g.kind == "gale" else rel <= 0) if exact else (
                abs(rel) <= tol if g.kind == "gale" else rel <= tol)
            if not ok:
                passed = False
            if abs(rel) > abs(worst_rel):
                worst_rel, worst_node = rel, w
                worst_cap = math.copysign(2.0 ** (logd + math.log2(abs(float(rel)))), float(rel)) \
                    if rel else 0.0
        for b, p in ((0, p0), (1, p1)):
            child_log = logd + s + log2_exact(p) if p > 0 else -math.inf
            stack.append((w + str(b), rule.advance(st, b), child_log))
    return ValidationReport(passed, g.kind, depth, nodes, mode, 0.0 if exact else tol,
                            worst_node, float(worst_rel), worst_cap, bad)


@dataclass
class KraftResult:
    value: float
    bound: float
    ratio: Number
    holds: bool


def kraft_sum(g: SGale, prefix_set: Iterable[str], w: str = "",
              mode: str = "auto", tol: float = DEFAULT_TOL) -> KraftResult:
    """``sum_{u in B} 2**(-s|u|) d(wu)`` together with the bound ``d(w)``.

    ``ratio`` is the sum divided by ``d(w)``, i.e. the total bet mass the rule
    sends from ``w`` into ``B``; it is exact in exact mode.
    """
    items = require_prefix_set(prefix_set)
    check_bits(w)
    mode = _resolve_mode(g, mode)
    exact = mode == "exact"
    depth = g.rule.depth
    if depth is not None and any(len(w) + len(u) > depth for u in items):
        raise DomainError("prefix set reaches beyond the rule depth")
    base = g.rule.state_at(w)
    ratio: Number = Fraction(0) if exact else 0.0
    for u in items:
        st = base
        mass: Number = Fraction(1) if exact else 1.0
        for ch in u:
            b = 1 if ch == "1" else 0
            p = g.rule.split(st)[b]
            mass *= p if exact else float(p)
            if not mass:
                break
            st = g.rule.advance(st, b)
        ratio += mass
    logd = evaluate(g, w).log_capitals[-1] if w else g.log_initial
    bound = 2.0 ** logd
    holds = ratio <= 1 if exact else ratio <= 1 + tol
    return KraftResult(float(ratio) * bound, bound, ratio, bool(holds))


# ---------------------------------------------------------------------------
# Constructions on gales
# ---------------------------------------------------------------------------


def mix(gales: Sequence[SGale], weights: Sequence[Number] | None = None) -> SGale:
    """Weighted sum of gales sharing one exponent.

    Default weights are ``2**-k / d_k(lambda)``, so component ``k``
    contributes ``2**-k`` to the initial capital.
    """
    if not gales:
        raise DomainError("mix needs at least one gale")
    s = gales[0].s
    if any(g.s != s for g in gales):
        raise DomainError("all mixed gales must share the exponent s")
    coeffs: list[Number] = []
    for k, g in enumerate(gales):
        if weights is None:
            if g.log_initial == -math.inf:
                raise ZeroDivisionError(f"component {k} has zero initial capital")
            coeffs.append(Fraction(1, 2 ** k))
        else:
            wk = weights[k]
            if g.initial is not None and isinstance(wk, (int, Fraction)):
                coeffs.append(Fraction(wk) * g.initial)
            else:
                coeffs.append(float(wk) * 2.0 ** g.log_initial)
    kind = "gale" if all(g.kind == "gale" for g in gales) else "supergale"
    total = sum(coeffs)
    rule = MixtureRule([g.rule for g in gales], coeffs)
    if isinstance(total, (int, Fraction)):
        return SGale(s, rule, kind, Fraction(total))
    return SGale(s, rule, kind, None, log2_exact(total))


def scale_exponent(g: SGale, t: Number, allow_negative: bool = False) -> SGale:
    """The gale ``w -> 2**(-t|w|) d(w)`` at exponent ``s - t``."""
    s_new = g.s - t
    if s_new < 0 and not allow_negative:
        raise DomainError(f"scaling by {t} makes the exponent negative ({s_new})")
    if s_new < 0:
        # SGale rejects negative exponents; bypass for the explicit opt-in.
        out = object.__new__(SGale)
        for name, value in (("s", s_new), ("rule", g.rule), ("kind", g.kind),
                            ("initial", g.initial), ("log_initial", g.log_initial)):
            object.__setattr__(out, name, value)
        return out
    return SGale(s_new, g.rule, g.kind, g.initial, g.log_initial)


def gale_from_measure(beta: Any, s: Number) -> SGale:
    """The s-gale ``d(w) = 2**(s|w|) mu_beta(w)``."""
    lo, hi = beta.bounds
    if not (0 < lo and hi < 1):
        raise DomainError("gale_from_measure needs every beta_i in (0, 1)")
    return SGale(s, MeasureRule(beta), "gale", Fraction(1))


def cover_gale(strings: Iterable[str], s: Number, s_prime: Number) -> SGale:
    """The s-gale concentrating capital ``2**((s - s')n)`` on every string of ``A``.

    For ``|w| <= n`` capital is ``2**((s-s')|w|) * sum 2**(-s'|u|)`` over
    extensions ``wu`` in ``A``; past depth ``n`` it evolves by even bets.
    """
    if not (s > s_prime > 0):
        raise DomainError("cover_gale needs s > s' > 0")
    rule = CoverRule(strings)
    rule.s_prime = s_prime
    n = rule.n
    log_init = math.log2(len(rule.strings)) - float(s_prime) * n
    exponent = Fraction(s_prime) * n
    initial = None
    if exponent.denominator == 1:
        initial = Fraction(len(rule.strings)) / Fraction(2) ** int(exponent)
    return SGale(s, rule, "gale", initial, log_init)
