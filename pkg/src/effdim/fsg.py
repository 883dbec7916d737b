"""k-account finite-state gamblers and the s-gales they induce.

Each account keeps its own capital; at state ``q`` account ``i`` places the
fraction ``bets[i][q][b]`` of its capital on bit ``b``.  The induced s-gale
is the sum of the accounts.  Internally it is a single betting rule whose
state is the automaton state plus each account's share of total capital.
"""

from __future__ import annotations

import math
from itertools import product
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .gales import BetRule, SGale
from .util import Number, check_bits, format_rational, log2_exact, parse_rational, resolve_window


MIN_SEARCH_LENGTH = 64


class FiniteStateGambler:
    """A k-account FSG with rational bets.

    ``transition[q] = (q0, q1)`` gives the successor on bits 0 and 1.
    ``bets[i][q] = (p0, p1)`` is account ``i``'s wager at state ``q``.
    Structural defects (unknown states, partial transitions) raise at
    construction; bet pairs that do not sum to one are reported by
    ``problems()`` so that a validator can name them.
    """

    def __init__(self, states: Sequence[str], transition: Mapping[str, Sequence[str]],
                 bets: Sequence[Mapping[str, Sequence[object]]], start: str,
                 capitals: Sequence[object]):
        self.states = tuple(str(q) for q in states)
        if not self.states:
            raise StructuralError("an FSG needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise StructuralError("duplicate state names")
        known = set(self.states)
        if start not in known:
            raise StructuralError(f"start state {start!r} is not a state")
        self.start = start
        self.transition: dict[str, tuple[str, str]] = {}
        for q in self.states:
            if q not in transition:
                raise StructuralError(f"transition undefined at state {q!r}")
            nxt = tuple(transition[q])
            if len(nxt) != 2 or any(r not in known for r in nxt):
                raise StructuralError(f"bad transition entry at state {q!r}: {nxt!r}")
            self.transition[q] = nxt  # type: ignore[assignment]
        if len(bets) != len(capitals):
            raise StructuralError("one betting table per account")
        if not bets:
            raise StructuralError("an FSG needs at least one account")
        self.bets: list[dict[str, tuple[Fraction, Fraction]]] = []
        for i, table in enumerate(bets):
            row = {}
            for q in self.states:
                if q not in table:
                    raise StructuralError(f"account {i + 1} has no bet at state {q!r}")
                pair = table[q]
                if isinstance(pair, (list, tuple)):
                    row[q] = (parse_rational(pair[0]), parse_rational(pair[1]))
                else:
                    p0 = parse_rational(pair)
                    row[q] = (p0, 1 - p0)
            self.bets.append(row)
        self.capitals = tuple(parse_rational(c) for c in capitals)
        if any(c < 0 for c in self.capitals):
            raise DomainError("initial capitals must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.bets)

    def problems(self) -> list[str]:
        out = []
        for i, row in enumerate(self.bets):
            for q in self.states:
                p0, p1 = row[q]
                if not (0 <= p0 <= 1 and 0 <= p1 <= 1):
                    out.append(f"account {i + 1}, state {q}: bet outside [0, 1] ({p0}, {p1})")
                elif p0 + p1 != 1:
                    out.append(f"account {i + 1}, state {q}: bets sum to {p0 + p1}, not 1")
        return out

    def step(self, q: str, bit: int) -> str:
        return self.transition[q][bit]

    def run_state(self, w: str) -> str:
        """``delta*(w)``."""
        q = self.start
        for ch in check_bits(w):
            q = self.transition[q][1 if ch == "1" else 0]
        return q

    def to_json(self) -> dict:
        return {
            "states": list(self.states),
            "start": self.start,
            "transition": {q: list(self.transition[q]) for q in self.states},
            "bets": [{q: [format_rational(a), format_rational(b)] for q, (a, b) in row.items()}
                     for row in self.bets],
            "capitals": [format_rational(c) for c in self.capitals],
        }

    @classmethod
    def from_json(cls, spec: Mapping[str, Any]) -> "FiniteStateGambler":
        try:
            return cls(spec["states"], spec["transition"], spec["bets"],
                       spec.get("start", spec["states"][0]), spec["capitals"])
        except (KeyError, TypeError, IndexError) as exc:
            raise StructuralError(f"malformed FSG spec: {exc}") from exc


def run_state(G: FiniteStateGambler, w: str) -> str:
    return G.run_state(w)


class FSGRule(BetRule):
    """Betting rule of the summed accounts; state = (q, account shares)."""

    exact = True

    def __init__(self, G: FiniteStateGambler):
        self.G = G
        total = sum(G.capitals)
        k = G.k
        self._shares = tuple(c / total for c in G.capitals) if total else tuple(
            Fraction(1, k) for _ in range(k))

    def start(self) -> tuple:
        return self.G.start, self._shares

    def split(self, state: tuple) -> tuple[Fraction, Fraction]:
        q, shares = state
        p0 = p1 = Fraction(0)
        for row, m in zip(self.G.bets, shares):
            if m:
                a, b = row[q]
                p0 += m * a
                p1 += m * b
        return p0, p1

    def advance(self, state: tuple, bit: int) -> tuple:
        q, shares = state
        if len(shares) > 1:
            weighted = [m * row[q][bit] for row, m in zip(self.G.bets, shares)]
            total = sum(weighted)
            if total:
                shares = tuple(x / total for x in weighted)
        return self.G.transition[q][bit], shares

    def log_bets(self, w: str) -> np.ndarray:
        if self.G.k > 1:
            return super().log_bets(w)
        # single account: table lookups in float, no share bookkeeping
        G = self.G
        logs = {q: tuple(log2_exact(p) for p in G.bets[0][q]) for q in G.states}
        out = np.empty(len(w))
        q = G.start
        for i, ch in enumerate(w):
            b = 1 if ch == "1" else 0
            out[i] = logs[q][b]
            q = G.transition[q][b]
        return out

    def to_json(self) -> dict:
        return {"type": "fsg", "fsg": self.G.to_json()}


def induced_gale(G: FiniteStateGambler, s: Number) -> SGale:
    """``d_G^(s) = sum_i d_{G,i}^(s)`` with ``d_{G,i}(wb) = 2**s d_{G,i}(w) beta(i, delta*(w), b)``."""
    if s < 0:
        raise DomainError("s must be >= 0")
    return SGale(s, FSGRule(G), "gale", sum(G.capitals, Fraction(0)))


def scaled_account_capitals(G: FiniteStateGambler, w: str) -> list[Fraction]:
    """Exact ``d_{G,i}(w) * 2**(-s|w|)`` for every account (independent of s)."""
    caps = list(G.capitals)
    q = G.start
    for ch in check_bits(w):
        b = 1 if ch == "1" else 0
        caps = [c * row[q][b] for c, row in zip(caps, G.bets)]
        q = G.transition[q][b]
    return caps


def account_log_capitals(G: FiniteStateGambler, s: Number, w: str) -> np.ndarray:
    """log2 of each account's capital after every prefix: shape (k, |w|+1)."""
    out = np.empty((G.k, len(w) + 1))
    for i, row in enumerate(G.bets):
        logs = {q: tuple(log2_exact(p) for p in row[q]) for q in G.states}
        acc = log2_exact(G.capitals[i])
        out[i, 0] = acc
        q = G.start
        for n, ch in enumerate(w, start=1):
            b = 1 if ch == "1" else 0
            acc += logs[q][b] + float(s)
            out[i, n] = acc
            q = G.transition[q][b]
    return out


# ---------------------------------------------------------------------------
# Success-exponent search
# ---------------------------------------------------------------------------


@dataclass
class ExponentEstimate:
    s: float
    mode: str
    window: tuple[int, int]
    margin_bits: float
    iterations: int


def success_exponent_search(G: FiniteStateGambler, prefix: str, mode: str = "io",
                            tol: float = 1e-3, window: tuple[int, int] | None = None,
                            margin: float = 1.0) -> ExponentEstimate:
    """Least ``s`` in [0, 1] at which the induced s-gale gains ``margin`` bits.

    ``io`` asks for the window maximum of log-capital to reach
    ``log d(lambda) + margin``; ``ae`` asks the window minimum to.  The
    bisection runs a fixed number of halvings, so the answer is the least
    dyadic grid point satisfying the criterion and ``ae >= io`` always.
    Returns 1.0 when even s = 1 fails.
    """
    check_bits(prefix)
    if mode not in ("io", "ae"):
        raise DomainError(f"mode must be 'io' or 'ae', not {mode!r}")
    if len(prefix) < MIN_SEARCH_LENGTH:
        raise DomainError(f"prefix must have at least {MIN_SEARCH_LENGTH} bits")
    if sum(G.capitals) == 0:
        raise DomainError("all initial capitals are zero")
    n = len(prefix)
    lo_w, hi_w = resolve_window(n, window)
    base = induced_gale(G, 0)
    # capital at exponent s is the s = 0 trace plus s * n
    lc0 = base.rule.log_bets(prefix).cumsum()
    lc0 = np.concatenate([[0.0], lc0])
    idx = np.arange(lo_w, hi_w + 1)
    seg = lc0[idx]
    reduce = np.max if mode == "io" else np.min

    def ok(s: float) -> bool:
        return bool(reduce(seg + s * idx) >= margin)

    iters = max(1, math.ceil(math.log2(1 / tol)))
    lo, hi = 0.0, 1.0
    if ok(0.0):
        return ExponentEstimate(0.0, mode, (lo_w, hi_w), margin, 0)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return ExponentEstimate(hi, mode, (lo_w, hi_w), margin, iters)


# ---------------------------------------------------------------------------
# A small library of gamblers
# ---------------------------------------------------------------------------


def constant_gambler(p0: object = Fraction(1, 2), capital: object = 1) -> FiniteStateGambler:
    p0 = parse_rational(p0)
    return FiniteStateGambler(["q"], {"q": ["q", "q"]}, [{"q": [p0, 1 - p0]}], "q", [capital])


def parity_gambler(even_p0: object, odd_p0: object) -> FiniteStateGambler:
    """Two states tracking the parity of ones seen so far."""
    a, b = parse_rational(even_p0), parse_rational(odd_p0)
    return FiniteStateGambler(
        ["even", "odd"], {"even": ["even", "odd"], "odd": ["odd", "even"]},
        [{"even": [a, 1 - a], "odd": [b, 1 - b]}], "even", [1])


def context_gambler(order: int, bets_on_zero: Mapping[str, object] | None = None) -> FiniteStateGambler:
    """State = last ``order`` bits, padded with zeros at the start (1, 2 or 4 states for order 0..2).

    ``bets_on_zero`` maps a context to the fraction bet on 0; missing
    contexts bet evenly.
    """
    if order < 0:
        raise DomainError("order must be >= 0")
    ctxs = ["".join(t) for t in product("01", repeat=order)]
    bets_on_zero = bets_on_zero or {}
    trans = {}
    table = {}
    for c in ctxs:
        trans[c] = [(c + b)[len(c) + 1 - order:] if order else "" for b in "01"]
        p0 = parse_rational(bets_on_zero.get(c, Fraction(1, 2)))
        table[c] = [p0, 1 - p0]
    return FiniteStateGambler(ctxs, trans, [table], "0" * order, [1])


def frequency_gambler(training: str, order: int = 0, prior: int = 1) -> FiniteStateGambler:
    """Context gambler whose bets are add-``prior`` frequencies from ``training``."""
    check_bits(training)
    padded = "0" * order + training
    counts: dict[str, list[int]] = {}
    for i in range(order, len(padded)):
        counts.setdefault(padded[i - order:i], [0, 0])[int(padded[i])] += 1
    bets = {c: Fraction(z + prior, z + o + 2 * prior) for c, (z, o) in counts.items()}
    return context_gambler(order, bets)


def multi_account(gamblers: Sequence[FiniteStateGambler],
                  capitals: Sequence[object] | None = None) -> FiniteStateGambler:
    """Run several one-account gamblers in parallel on a product automaton."""
    if not gamblers:
        raise DomainError("need at least one gambler")
    if any(g.k != 1 for g in gamblers):
        raise DomainError("multi_account combines one-account gamblers")
    caps = [g.capitals[0] for g in gamblers] if capitals is None else capitals
    start = tuple(g.start for g in gamblers)
    names: dict[tuple, str] = {}
    order = [start]
    names[start] = "|".join(start)
    trans: dict[str, list[str]] = {}
    i = 0
    while i < len(order):
        st = order[i]
        i += 1
        succ = []
        for b in (0, 1):
            nxt = tuple(g.transition[q][b] for g, q in zip(gamblers, st))
            if nxt not in names:
                names[nxt] = "|".join(nxt)
                order.append(nxt)
            succ.append(names[nxt])
        trans[names[st]] = succ
    bets = [{names[st]: list(g.bets[0][q]) for st in order for q in [st[j]]}
            for j, g in enumerate(gamblers)]
    return FiniteStateGambler([names[st] for st in order], trans, bets, names[start], caps)
