"""Log-loss predictors, their martingales and mixtures.

A predictor assigns ``pi(w, 1)`` to every prefix ``w``; ``pi(w, 0)`` is the
complement.  Like betting rules they run as automata so a long prefix is
scored in one pass.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .bias import BiasSequence, bias_from_json, shannon_entropy
from .errors import DomainError, MalformedRuleError, UndefinedConditionalError
from .gales import BetRule, SGale
from .util import Number, check_bits, format_rational, log2_exact, parse_rational, resolve_window


class Predictor:
    """Base class: ``start``, ``p1(state)`` and ``advance(state, bit)``."""

    exact = True

    def start(self) -> Any:
        raise NotImplementedError

    def p1(self, state: Any) -> Number:
        raise NotImplementedError

    def advance(self, state: Any, bit: int) -> Any:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")

    def state_at(self, w: str) -> Any:
        st = self.start()
        for ch in w:
            st = self.advance(st, 1 if ch == "1" else 0)
        return st

    def predict(self, w: str, b: int) -> Number:
        p = self.p1(self.state_at(check_bits(w)))
        return p if b else 1 - p

    def probabilities(self, w: str) -> list[Number]:
        """``pi(w[0..i-1], w[i])`` for every position of ``w``."""
        out = []
        st = self.start()
        for ch in w:
            b = 1 if ch == "1" else 0
            p = self.p1(st)
            if not 0 <= p <= 1:
                raise MalformedRuleError(f"prediction {p!r} outside [0, 1]")
            out.append(p if b else 1 - p)
            st = self.advance(st, b)
        return out


class ConstantPredictor(Predictor):
    def __init__(self, p1: object):
        self.p = _prob(p1)
        self.exact = isinstance(self.p, Fraction)

    def start(self) -> None:
        return None

    def p1(self, state: None) -> Number:
        return self.p

    def advance(self, state: None, bit: int) -> None:
        return None

    def to_json(self) -> dict:
        return {"type": "constant", "p1": format_rational(self.p)}


class MeasurePredictor(Predictor):
    """The beta-conditional predictor ``pi(w, 1) = beta_|w|``."""

    def __init__(self, beta: BiasSequence):
        self.beta = beta
        self.exact = beta.exact

    def start(self) -> int:
        return 0

    def p1(self, i: int) -> Number:
        return self.beta.value(i)

    def advance(self, i: int, bit: int) -> int:
        return i + 1

    def to_json(self) -> dict:
        return {"type": "measure", "beta": self.beta.to_json()}


class TablePredictor(Predictor):
    """Explicit ``pi(w, 1)`` per prefix, ``default`` elsewhere."""

    def __init__(self, table: Mapping[str, object], default: object = Fraction(1, 2)):
        self.table = {check_bits(w): _prob(p) for w, p in table.items()}
        self.default = _prob(default)
        self.maxlen = max((len(w) for w in self.table), default=-1)
        self.exact = all(isinstance(p, Fraction) for p in [*self.table.values(), self.default])

    def start(self) -> str | None:
        return "" if self.maxlen >= 0 else None

    def p1(self, w: str | None) -> Number:
        return self.default if w is None else self.table.get(w, self.default)

    def advance(self, w: str | None, bit: int) -> str | None:
        if w is None or len(w) >= self.maxlen:
            return None
        return w + str(bit)

    def to_json(self) -> dict:
        return {"type": "table", "p1": {w: format_rational(p) for w, p in sorted(self.table.items())},
                "default": format_rational(self.default)}


class ContextPredictor(Predictor):
    """``pi(w, 1)`` from the last ``order`` bits (zero-padded at the start)."""

    def __init__(self, order: int, table: Mapping[str, object] | None = None):
        if order < 0:
            raise DomainError("order must be >= 0")
        self.order = order
        raw = table or {}
        self.table = {c: _prob(p) for c, p in raw.items()}
        if any(len(c) != order for c in self.table):
            raise DomainError(f"contexts must have length {order}")
        self.exact = all(isinstance(p, Fraction) for p in self.table.values())

    def start(self) -> str:
        return "0" * self.order

    def p1(self, ctx: str) -> Number:
        return self.table.get(ctx, Fraction(1, 2))

    def advance(self, ctx: str, bit: int) -> str:
        return (ctx + str(bit))[1:] if self.order else ""

    def to_json(self) -> dict:
        return {"type": "context", "order": self.order,
                "p1": {c: format_rational(p) for c, p in sorted(self.table.items())}}


class KTPredictor(Predictor):
    """Adaptive add-1/2 (Krichevsky-Trofimov) estimator per context of length ``order``."""

    def __init__(self, order: int = 0, exact: bool = True):
        if order < 0:
            raise DomainError("order must be >= 0")
        self.order = order
        self.exact = exact

    def _p(self, z: int, o: int) -> Number:
        if self.exact:
            return Fraction(2 * o + 1, 2 * (z + o) + 2)
        return (o + 0.5) / (z + o + 1)

    def start(self) -> tuple:
        return "0" * self.order, ()

    def p1(self, state: tuple) -> Number:
        ctx, counts = state
        z, o = dict(counts).get(ctx, (0, 0))
        return self._p(z, o)

    def advance(self, state: tuple, bit: int) -> tuple:
        ctx, counts = state
        d = dict(counts)
        z, o = d.get(ctx, (0, 0))
        d[ctx] = (z + (bit == 0), o + (bit == 1))
        nxt = (ctx + str(bit))[1:] if self.order else ""
        return nxt, tuple(sorted(d.items()))

    def probabilities(self, w: str) -> list[Number]:
        # mutable counts: the generic path copies the table at every step
        counts: dict[str, list[int]] = {}
        ctx = "0" * self.order
        out = []
        for ch in w:
            b = 1 if ch == "1" else 0
            z, o = counts.setdefault(ctx, [0, 0])
            p = self._p(z, o)
            out.append(p if b else 1 - p)
            counts[ctx][b] += 1
            ctx = (ctx + ch)[1:] if self.order else ""
        return out

    def to_json(self) -> dict:
        out: dict[str, Any] = {"type": "kt", "order": self.order}
        if not self.exact:
            out["exact"] = False
        return out


class MixturePredictor(Predictor):
    """Weighted mixture with weights ``2**-(2j+3)`` and a shrinking floor.

    With ``mu_n(w) = 2**-(2n+1) + sum_j 2**-(2j+3) mu[pi_j](w)`` for
    ``n = |w|``, the prediction is ``pi(w, 1) = mu_{n+1}(w1) / mu_n(w)``.
    The state keeps the floor and each weighted component measure as
    fractions of ``mu_n(w)``.
    """

    def __init__(self, components: Sequence[Predictor]):
        if not components:
            raise DomainError("mixture needs at least one predictor")
        self.components = tuple(components)
        self.exact = all(c.exact for c in self.components)
        one = Fraction(1) if self.exact else 1.0
        raw = [one / 2] + [one / 2 ** (2 * j + 3) for j in range(len(self.components))]
        total = sum(raw)
        self._init = tuple(x / total for x in raw)

    def start(self) -> tuple:
        return tuple(c.start() for c in self.components), self._init

    def p1(self, state: tuple) -> Number:
        states, (f, *v) = state
        p = f / 4
        for c, st, vj in zip(self.components, states, v):
            if vj:
                p += vj * c.p1(st)
        return p

    def advance(self, state: tuple, bit: int) -> tuple:
        states, (f, *v) = state
        terms = [f / 4]
        for c, st, vj in zip(self.components, states, v):
            if vj:
                q = c.p1(st)
                terms.append(vj * (q if bit else 1 - q))
            else:
                terms.append(vj)
        total = sum(terms)
        return (tuple(c.advance(st, bit) for c, st in zip(self.components, states)),
                tuple(t / total for t in terms))

    def probabilities(self, w: str) -> list[Number]:
        # the mixture only needs each component's probabilities along w
        comp = [c.probabilities(w) for c in self.components]
        f, *v = self._init
        out = []
        for i, ch in enumerate(w):
            r = [row[i] for row in comp]
            if ch == "1":
                p = f / 4 + sum(vj * rj for vj, rj in zip(v, r))
                out.append(p)
                v = [vj * rj for vj, rj in zip(v, r)]
            else:
                p = f / 4 + sum(vj * (1 - rj) for vj, rj in zip(v, r))
                out.append(1 - p)
                v = [vj * rj for vj, rj in zip(v, r)]
            f = f / 4
            total = f + sum(v)
            f = f / total
            v = [vj / total for vj in v]
        return out

    def to_json(self) -> dict:
        return {"type": "mixture", "components": [c.to_json() for c in self.components]}


class MartingalePredictor(Predictor):
    """``pi(w, b) = d(wb) / (2 d(w))`` for a martingale ``d``."""

    def __init__(self, d: SGale):
        if d.s != 1:
            raise DomainError("from_martingale needs a martingale (s = 1)")
        self.d = d
        self.exact = d.rule.exact

    def start(self) -> tuple:
        return self.d.rule.start(), self.d.log_initial != -math.inf

    def p1(self, state: tuple) -> Number:
        st, alive = state
        if not alive:
            raise UndefinedConditionalError("martingale has zero capital at this node")
        p0, p1 = self.d.rule.split(st)
        if p0 + p1 != 1 and (self.exact or abs(p0 + p1 - 1) > 1e-12):
            raise DomainError("martingale bets do not sum to one")
        return p1

    def advance(self, state: tuple, bit: int) -> tuple:
        st, alive = state
        bet = self.d.rule.split(st)[bit] if alive else 0
        return self.d.rule.advance(st, bit), bool(alive and bet > 0)


class PredictorRule(BetRule):
    """Betting rule of ``to_martingale``: bet ``(1 - pi(w,1), pi(w,1))``."""

    def __init__(self, pi: Predictor):
        self.pi = pi
        self.exact = pi.exact

    def start(self) -> Any:
        return self.pi.start()

    def split(self, state: Any) -> tuple[Number, Number]:
        p = self.pi.p1(state)
        return 1 - p, p

    def advance(self, state: Any, bit: int) -> Any:
        return self.pi.advance(state, bit)

    def log_bets(self, w: str) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.array([log2_exact(p) for p in self.pi.probabilities(w)], dtype=float)

    def to_json(self) -> dict:
        return {"type": "predictor", "predictor": self.pi.to_json()}


def _prob(x: object) -> Number:
    v = x if isinstance(x, float) else parse_rational(x)
    if not 0 <= v <= 1:
        raise MalformedRuleError(f"probability {x!r} outside [0, 1]")
    return v


def predictor_from_json(spec: Mapping[str, Any]) -> Predictor:
    kind = spec.get("type")
    if kind == "constant":
        return ConstantPredictor(spec["p1"])
    if kind == "measure":
        return MeasurePredictor(bias_from_json(spec["beta"]))
    if kind == "table":
        return TablePredictor(spec.get("p1", {}), spec.get("default", "1/2"))
    if kind == "context":
        return ContextPredictor(int(spec["order"]), spec.get("p1", {}))
    if kind == "kt":
        return KTPredictor(int(spec.get("order", 0)), bool(spec.get("exact", True)))
    if kind == "mixture":
        return MixturePredictor([predictor_from_json(c) for c in spec["components"]])
    raise DomainError(f"unknown predictor type {kind!r}")


# ---------------------------------------------------------------------------
# Losses and conversions
# ---------------------------------------------------------------------------


def log_loss(pi: Predictor, w: str) -> float:
    """``sum_i log2 1/pi(w[0..i-1], w[i])``; infinite if a realized bit got probability 0."""
    check_bits(w)
    total = 0.0
    for p in pi.probabilities(w):
        if p == 0:
            return math.inf
        total -= log2_exact(p)
    return total


def likelihood(pi: Predictor, w: str) -> Number:
    """``mu[pi](w)``, exact for rational predictors."""
    check_bits(w)
    m: Number = Fraction(1) if pi.exact else 1.0
    for p in pi.probabilities(w):
        m *= p
    return m


def to_martingale(pi: Predictor) -> SGale:
    """``d(w) = 2**|w| mu[pi](w)``."""
    return SGale(1, PredictorRule(pi), "gale", Fraction(1))


def from_martingale(d: SGale) -> Predictor:
    return MartingalePredictor(d)


def mixture(predictors: Sequence[Predictor]) -> MixturePredictor:
    return MixturePredictor(predictors)


@dataclass
class LossTrace:
    losses: np.ndarray
    window: tuple[int, int]
    rate_lower: float
    rate_upper: float
    success: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "log_loss", "success_rate"])
        for n, (l, s) in enumerate(zip(self.losses, self.success)):
            wr.writerow([n, repr(float(l)), "" if n == 0 else repr(float(s))])
        return buf.getvalue()


def loss_trace(pi: Predictor, w: str, window: tuple[int, int] | None = None) -> LossTrace:
    check_bits(w)
    probs = np.array([float(p) for p in pi.probabilities(w)])
    with np.errstate(divide="ignore"):
        losses = np.concatenate([[0.0], np.cumsum(-np.log2(probs))])
    hits = np.concatenate([[0.0], np.cumsum(probs)])
    n = len(w)
    idx = np.arange(1, n + 1)
    success = np.concatenate([[math.nan], hits[1:] / idx])
    lo, hi = resolve_window(n, window)
    k = np.arange(max(lo, 1), hi + 1)
    if len(k):
        rates = losses[k] / k
        lower, upper = float(rates.min()), float(rates.max())
    else:
        lower = upper = math.nan
    return LossTrace(losses, (lo, hi), lower, upper, success)


@dataclass
class SuccessRate:
    rate: Number
    lower: float
    upper: float
    window: tuple[int, int]


def success_rate(pi: Predictor, w: str, window: tuple[int, int] | None = None) -> SuccessRate:
    """``pi+(w) / |w|`` plus its min / max running average over the window."""
    check_bits(w)
    if not w:
        raise DomainError("success rate of the empty string is undefined")
    probs = pi.probabilities(w)
    exact = sum(probs, Fraction(0) if pi.exact else 0.0) / len(w)
    running = np.cumsum(np.array([float(p) for p in probs])) / np.arange(1, len(w) + 1)
    lo, hi = resolve_window(len(w), window)
    seg = running[max(lo, 1) - 1:hi]
    return SuccessRate(exact, float(seg.min()), float(seg.max()), (lo, hi))


@dataclass
class BoundReport:
    p: float
    d: float
    lower_bound: float
    upper_bound: float
    lower_holds: bool
    upper_holds: bool
    slack: float

    @property
    def holds(self) -> bool:
        return self.lower_holds and self.upper_holds

    def to_json(self) -> dict:
        return dict(p=self.p, d=self.d, lower_bound=self.lower_bound,
                    upper_bound=self.upper_bound, lower_holds=self.lower_holds,
                    upper_holds=self.upper_holds, slack=self.slack)


def bound_check(p: float, d: float, slack: float = 0.0) -> BoundReport:
    """Check ``2(1 - p) <= d <= H(p)`` with additive ``slack``."""
    if not 0.5 <= p <= 1:
        raise DomainError("predictability must lie in [1/2, 1]")
    if not 0 <= d <= 1:
        raise DomainError("dimension must lie in [0, 1]")
    lo = 2 * (1 - p)
    hi = shannon_entropy(p)
    return BoundReport(float(p), float(d), lo, hi, lo <= d + slack, d <= hi + slack, slack)
