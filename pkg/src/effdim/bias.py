"""Bias sequences, product measures and large-deviation tails.

A bias sequence assigns a head probability ``beta_i`` to every position.
Values are Fractions whenever the schedule is specified rationally, so the
product measure can be computed exactly on short strings.

Randomness comes from numpy's PCG64 generator.  Bit ``i`` of a sample is 1
iff the ``i``-th 53-bit uniform ``u = (next_uint64 >> 11) * 2**-53`` drawn
by ``Generator.random`` satisfies ``u < beta_i``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np
from scipy.stats import binom

from .errors import DomainError, ResourceError, NumericFailure
from .gales import BetRule, DEFAULT_TOL, trace_from_log_capitals, EvaluationTrace
from .util import Number, format_rational, log2_exact, parse_rational, resolve_window

GRID_BITS = 20
DP_MAX_N = 4096
DP_MAX_SUPPORT = 4_000_000


# ---------------------------------------------------------------------------
# Tower function and log*
# ---------------------------------------------------------------------------


def tower(j: int) -> int:
    """``t_0 = 1``, ``t_{j+1} = 2**t_j``; materialized for ``j <= 5``."""
    if j < 0:
        raise DomainError("tower index must be >= 0")
    if j > 5:
        raise DomainError("t_6 = 2**(2**65536) cannot be materialized")
    t = 1
    for _ in range(j):
        t = 1 << t
    return t


def log_star(n: int) -> int:
    """``min{j : t_j >= n}``.

    Uses ``t_{j+1} >= n  <=>  t_j >= ceil(log2 n)`` so no tower is built.
    """
    if n <= 1:
        return 0
    return 1 + log_star((n - 1).bit_length())


# ---------------------------------------------------------------------------
# Bias sequences
# ---------------------------------------------------------------------------


class BiasSequence:
    """Per-position head probabilities with declared bounds.

    Subclasses define ``value(i)``; ``values(n)`` returns the first ``n`` as
    floats.  ``length`` is ``None`` for infinite schedules.
    """

    schedule = "function"
    length: int | None = None
    exact = True

    def value(self, i: int) -> Number:
        raise NotImplementedError

    @property
    def bounds(self) -> tuple[Number, Number]:
        raise NotImplementedError

    def values(self, n: int) -> np.ndarray:
        self._check_len(n)
        return np.array([float(self.value(i)) for i in range(n)], dtype=float)

    def to_json(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")

    def _check_len(self, n: int) -> None:
        if self.length is not None and n > self.length:
            raise DomainError(f"bias table has only {self.length} entries, {n} requested")

    def _check_open(self) -> None:
        lo, hi = self.bounds
        if not (0 < lo <= hi < 1):
            raise DomainError(f"bias values must lie in (0, 1); bounds are [{lo}, {hi}]")


def _prob(x: object) -> Number:
    v = x if isinstance(x, float) else parse_rational(x)
    if not 0 <= v <= 1:
        raise DomainError(f"probability {x!r} outside [0, 1]")
    return v


class ConstantBias(BiasSequence):
    schedule = "constant"

    def __init__(self, beta: object):
        self.beta = _prob(beta)
        self.exact = isinstance(self.beta, Fraction)

    def value(self, i: int) -> Number:
        return self.beta

    @property
    def bounds(self) -> tuple[Number, Number]:
        return self.beta, self.beta

    def values(self, n: int) -> np.ndarray:
        return np.full(n, float(self.beta))

    def to_json(self) -> dict:
        return {"type": "constant", "beta": format_rational(self.beta)}


class TableBias(BiasSequence):
    """Finite table of values; ``periodic=True`` repeats it forever."""

    def __init__(self, values: Sequence[object], periodic: bool = False):
        if not values:
            raise DomainError("bias table must be nonempty")
        self.table = tuple(_prob(v) for v in values)
        self.periodic = periodic
        self.schedule = "periodic" if periodic else "table"
        self.length = None if periodic else len(self.table)
        self.exact = all(isinstance(v, Fraction) for v in self.table)
        self._floats = np.array([float(v) for v in self.table])

    def value(self, i: int) -> Number:
        if self.periodic:
            return self.table[i % len(self.table)]
        if i >= len(self.table):
            raise DomainError(f"bias table has only {len(self.table)} entries")
        return self.table[i]

    @property
    def bounds(self) -> tuple[Number, Number]:
        return min(self.table), max(self.table)

    def values(self, n: int) -> np.ndarray:
        self._check_len(n)
        if self.periodic:
            return np.resize(self._floats, n)
        return self._floats[:n].copy()

    def to_json(self) -> dict:
        return {"type": "periodic" if self.periodic else "table",
                "values": [format_rational(v) for v in self.table]}


class TowerBias(BiasSequence):
    """``beta_n = kappa(log* n)`` with ``kappa`` alternating by parity."""

    schedule = "tower"

    def __init__(self, kappa_even: object, kappa_odd: object):
        self.kappa_even = _prob(kappa_even)
        self.kappa_odd = _prob(kappa_odd)
        self.exact = isinstance(self.kappa_even, Fraction) and isinstance(self.kappa_odd, Fraction)

    def value(self, i: int) -> Number:
        return self.kappa_odd if log_star(i) % 2 else self.kappa_even

    @property
    def bounds(self) -> tuple[Number, Number]:
        return min(self.kappa_even, self.kappa_odd), max(self.kappa_even, self.kappa_odd)

    def values(self, n: int) -> np.ndarray:
        out = np.full(n, float(self.kappa_even))
        # log* is constant on (t_{j-1}, t_j]
        j, lo = 0, 0
        while lo < n:
            hi = tower(j) if j <= 4 else n - 1
            if j % 2:
                out[lo:min(hi, n - 1) + 1] = float(self.kappa_odd)
            lo, j = hi + 1, j + 1
        return out

    def to_json(self) -> dict:
        return {"type": "tower", "kappa_even": format_rational(self.kappa_even),
                "kappa_odd": format_rational(self.kappa_odd)}


class FunctionBias(BiasSequence):
    """A bias sequence given by an arbitrary callable (dilations, approximations)."""

    def __init__(self, fn: Callable[[int], Number], bounds: tuple[Number, Number],
                 schedule: str = "function", exact: bool = True, length: int | None = None):
        self.fn = fn
        self._bounds = bounds
        self.schedule = schedule
        self.exact = exact
        self.length = length

    def value(self, i: int) -> Number:
        self._check_len(i + 1)
        return self.fn(i)

    @property
    def bounds(self) -> tuple[Number, Number]:
        return self._bounds


def bias_from_json(spec: dict) -> BiasSequence:
    kind = spec.get("type")
    if kind == "constant":
        return ConstantBias(spec["beta"])
    if kind in ("table", "periodic"):
        return TableBias(spec["values"], periodic=(kind == "periodic" or spec.get("periodic", False)))
    if kind == "tower":
        return TowerBias(spec["kappa_even"], spec["kappa_odd"])
    raise DomainError(f"unknown bias schedule {kind!r}")


# ---------------------------------------------------------------------------
# Entropies and measures
# ---------------------------------------------------------------------------


def shannon_entropy(beta: Number) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    p = float(beta)
    if not 0 <= p <= 1:
        raise DomainError(f"probability {beta} outside [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _entropies(beta: BiasSequence, n: int) -> np.ndarray:
    p = beta.values(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.nan_to_num(h, nan=0.0)


def avg_entropy(beta: BiasSequence, n: int) -> float:
    """``H_n = (1/n) sum_{i<n} H(beta_i)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return float(_entropies(beta, n).mean())


def entropy_envelope(beta: BiasSequence, n: int,
                     window: tuple[int, int] | None = None) -> tuple[float, float]:
    """(min, max) of ``H_m`` over the window, finite proxies for H-minus / H-plus."""
    if n < 1:
        raise DomainError("n must be >= 1")
    lo, hi = resolve_window(n, window)
    lo = max(lo, 1)
    running = np.cumsum(_entropies(beta, n)) / np.arange(1, n + 1)
    seg = running[lo - 1:hi]
    return float(seg.min()), float(seg.max())


def xi_values(beta: BiasSequence, w: str) -> np.ndarray:
    """Per-bit self-information ``xi_i`` in bits."""
    p1 = beta.values(len(w))
    ones = np.frombuffer(w.encode(), dtype=np.uint8) == ord("1")
    with np.errstate(divide="ignore"):
        return -np.log2(np.where(ones, p1, 1.0 - p1))


def measure(beta: BiasSequence, w: str) -> float:
    """``log2 mu_beta(w)``."""
    if not w:
        return 0.0
    return float(-xi_values(beta, w).sum())


def measure_exact(beta: BiasSequence, w: str) -> Fraction:
    """``mu_beta(w)`` as a Fraction (rational schedules only)."""
    if not beta.exact:
        raise DomainError("exact measure requires a rational bias schedule")
    m = Fraction(1)
    for i, ch in enumerate(w):
        p = beta.value(i)
        m *= p if ch == "1" else 1 - p
    return m


@dataclass
class SelfInfoStats:
    n: int
    L_n: float
    H_n: float
    deviation: float


def self_information(beta: BiasSequence, prefix: str) -> SelfInfoStats:
    n = len(prefix)
    L = -measure(beta, prefix)
    H = avg_entropy(beta, n) if n else 0.0
    return SelfInfoStats(n, L, H, L - n * H)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_sequence(beta: BiasSequence, n: int, seed: int | Sequence[int]) -> str:
    """Pseudorandom ``beta``-distributed prefix of length ``n``."""
    if n < 0:
        raise DomainError("n must be >= 0")
    if n == 0:
        return ""
    lo, hi = beta.bounds
    if not (0 < lo and hi < 1):
        raise DomainError("sampling needs every beta_i strictly inside (0, 1)")
    u = make_rng(seed).random(n)
    bits = (u < beta.values(n)).astype(np.uint8) + ord("0")
    return bits.tobytes().decode()


# ---------------------------------------------------------------------------
# Large deviations
# ---------------------------------------------------------------------------


@dataclass
class TailResult:
    probability: float
    error_bits: float
    support: int


def _grouped(beta: BiasSequence, n: int) -> Counter:
    if beta.exact:
        return Counter(beta.value(i) for i in range(n))
    return Counter(beta.values(n).tolist())


def self_information_distribution(beta: BiasSequence, n: int,
                                  grid_bits: int = GRID_BITS) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of ``L_n`` on a grid of width ``2**-grid_bits`` bits.

    Positions sharing a bias value contribute a binomial block; blocks are
    convolved as sparse distributions.  Returns (grid values, probabilities).
    """
    if n > DP_MAX_N:
        raise ResourceError(f"n = {n} exceeds the DP budget of {DP_MAX_N}")
    scale = 2 ** grid_bits
    dist: dict[int, float] = {0: 1.0}
    for p, count in sorted(_grouped(beta, n).items()):
        pf = float(p)
        if not 0 < pf < 1:
            raise DomainError("bias values must lie in (0, 1)")
        q1 = round(-math.log2(pf) * scale)
        q0 = round(-math.log2(1 - pf) * scale)
        k = np.arange(count + 1)
        pmf = binom.pmf(k, count, pf)
        block: dict[int, float] = {}
        for kk, pp in zip(k.tolist(), pmf.tolist()):
            if pp > 0:
                key = kk * q1 + (count - kk) * q0
                block[key] = block.get(key, 0.0) + pp
        new: dict[int, float] = {}
        for a, pa in dist.items():
            for b, pb in block.items():
                new[a + b] = new.get(a + b, 0.0) + pa * pb
        if len(new) > DP_MAX_SUPPORT:
            raise ResourceError("support of the self-information law exceeds the DP budget")
        dist = new
    keys = np.array(sorted(dist), dtype=np.int64)
    probs = np.array([dist[k] for k in keys.tolist()])
    return keys, probs


def deviation_tail_exact(beta: BiasSequence, n: int, eps: float,
                         grid_bits: int = GRID_BITS) -> TailResult:
    """``P[|L_n - n H_n| >= eps n]`` under ``mu_beta`` by exact convolution.

    Each ``xi`` value is rounded to the grid, so the reported probability is
    exact for a perturbed ``L_n`` that differs from the true one by at most
    ``error_bits = n * 2**-grid_bits``.
    """
    if eps <= 0:
        raise DomainError("eps must be > 0")
    if n < 1:
        raise DomainError("n must be >= 1")
    keys, probs = self_information_distribution(beta, n, grid_bits)
    scale = 2 ** grid_bits
    center = n * avg_entropy(beta, n)
    dev = np.abs(keys / scale - center)
    tail = float(probs[dev >= eps * n].sum())
    return TailResult(min(tail, 1.0), n / scale, len(keys))


@dataclass
class McResult:
    estimate: float
    stderr: float
    trials: int


def deviation_tail_mc(beta: BiasSequence, n: int, eps: float, trials: int,
                      seed: int) -> McResult:
    """Monte-Carlo estimate of the deviation tail.

    Trial ``t`` draws its sequence from PCG64 seeded with ``[seed, t]``, so
    the estimate does not depend on how trials are scheduled.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    p1 = beta.values(n)
    x1 = -np.log2(p1)
    x0 = -np.log2(1 - p1)
    center = n * avg_entropy(beta, n)
    hits = 0
    for t in range(trials):
        u = make_rng([seed, t]).random(n)
        L = float(np.where(u < p1, x1, x0).sum())
        if abs(L - center) >= eps * n:
            hits += 1
    est = hits / trials
    return McResult(est, math.sqrt(est * (1 - est) / trials), trials)


def _mgf_terms(betas: np.ndarray, eps: float):
    h = -betas * np.log2(betas) - (1 - betas) * np.log2(1 - betas)
    x1 = -np.log2(betas)
    x0 = -np.log2(1 - betas)
    # both eta variants: xi - H - eps and H - xi - eps
    return [
        (1 - betas, x0 - h - eps, betas, x1 - h - eps),
        (1 - betas, h - x0 - eps, betas, h - x1 - eps),
    ]


def chernoff_margin(theta: float, delta: float, eps: float, step: float = 1e-3) -> float:
    """``min`` over the beta grid and both variants of ``1 - theta eps/2 - E exp(theta eta)``."""
    betas = _beta_grid(delta, step)
    worst = math.inf
    for w0, e0, w1, e1 in _mgf_terms(betas, eps):
        mgf = w0 * np.exp(theta * e0) + w1 * np.exp(theta * e1)
        worst = min(worst, float(np.min(1 - theta * eps / 2 - mgf)))
    return worst


def _beta_grid(delta: float, step: float) -> np.ndarray:
    lo, hi = float(delta), 1 - float(delta)
    count = max(int(round((hi - lo) / step)), 0) + 1
    return np.linspace(lo, hi, count)


def chernoff_alpha(delta: Number, eps: float, step: float = 1e-3,
                   tol: float = 1e-10) -> tuple[float, float]:
    """Find ``theta`` with ``E exp(theta eta) < 1 - theta eps/2`` on the whole beta grid.

    ``theta`` maximizes the worst-case margin (golden-section search over a
    bracket on which the margin turns negative); returns ``(theta, alpha)``
    with ``alpha = 1 - theta eps / 2``.
    """
    if not 0 < delta <= 0.5:
        raise DomainError("delta must lie in (0, 1/2]")
    if eps <= 0:
        raise DomainError("eps must be > 0")
    delta = float(delta)

    def f(t: float) -> float:
        return chernoff_margin(t, delta, eps, step)

    hi = 1.0
    while f(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise NumericFailure("margin never turns negative; bracket search diverged")
    lo = 0.0
    g = (math.sqrt(5) - 1) / 2
    a, b = lo + (1 - g) * (hi - lo), lo + g * (hi - lo)
    fa, fb = f(a), f(b)
    while hi - lo > tol * max(1.0, hi):
        if fa < fb:
            lo, a, fa = a, b, fb
            b = lo + g * (hi - lo)
            fb = f(b)
        else:
            hi, b, fb = b, a, fa
            a = lo + (1 - g) * (hi - lo)
            fa = f(a)
    theta = (lo + hi) / 2
    if not f(theta) > 0:
        raise NumericFailure(f"no feasible theta for delta={delta}, eps={eps}")
    alpha = 1 - theta * eps / 2
    if not 0 < alpha < 1:
        raise NumericFailure(f"alpha {alpha} outside (0, 1)")
    return theta, alpha


# ---------------------------------------------------------------------------
# Rationalization of computable bias sequences
# ---------------------------------------------------------------------------


@dataclass
class Rationalized:
    beta: FunctionBias
    m: int
    square_sum: float | None
    square_bound: float


def rationalize(approx: Callable[[int, int], Fraction], delta: Number,
                beta: BiasSequence | None = None, check_terms: int = 64) -> Rationalized:
    """Exactly computable ``beta'_i = g(i, m+i) - 2**-(m+i)``, ``m = 2 + ceil(log2(1/delta))``.

    ``approx(i, r)`` must be within ``2**-r`` of ``beta_i``.  When the true
    sequence is supplied, the partial square sum over the first
    ``check_terms`` positions is reported next to its termwise bound.
    """
    delta = parse_rational(delta)
    if delta <= 0:
        raise DomainError("delta must be > 0")
    # exact ceil(log2(1/delta)) for rationals
    k = 0
    while Fraction(2) ** k * delta < 1:
        k += 1
    m = 2 + k

    def value(i: int) -> Fraction:
        return parse_rational(approx(i, m + i)) - Fraction(1, 2 ** (m + i))

    out = FunctionBias(value, (delta / 2, 1 - delta), schedule="rationalized")
    bound = sum(4.0 ** (-(m + i) + 1) for i in range(check_terms))
    sq = None
    if beta is not None:
        sq = sum(float(beta.value(i) - value(i)) ** 2 for i in range(check_terms))
    return Rationalized(out, m, sq, bound)


# ---------------------------------------------------------------------------
# beta-martingales
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaMartingale:
    """A martingale fair with respect to ``mu_beta``.

    ``d(wb) = d(w) * bet(w, b) / P_beta(b at |w|)`` so that
    ``d(w) = (1 - beta_|w|) d(w0) + beta_|w| d(w1)`` whenever the rule's
    bets sum to one.
    """

    bias: BiasSequence
    rule: BetRule
    log_initial: float = 0.0

    def log_steps(self, w: str) -> np.ndarray:
        return self.rule.log_bets(w) + xi_values(self.bias, w)

    def evaluate(self, w: str, window: tuple[int, int] | None = None) -> EvaluationTrace:
        lc = np.empty(len(w) + 1)
        lc[0] = self.log_initial
        lc[1:] = self.log_initial + np.cumsum(self.log_steps(w))
        lc[np.isnan(lc)] = -np.inf
        return trace_from_log_capitals(w, lc, window)

    def log_capital(self, w: str) -> float:
        return float(self.evaluate(w).log_capitals[-1])

    def ratio_exact(self, w: str) -> Fraction:
        """Exact ``d(w) / d(lambda)`` for rational rules and biases."""
        if not (self.rule.exact and self.bias.exact):
            raise DomainError("exact capital needs a rational rule and bias")
        r = Fraction(1)
        st = self.rule.start()
        for i, ch in enumerate(w):
            b = 1 if ch == "1" else 0
            p = self.bias.value(i)
            r *= self.rule.split(st)[b] / (p if b else 1 - p)
            st = self.rule.advance(st, b)
        return r


@dataclass
class BetaValidation:
    passed: bool
    depth: int
    nodes: int
    worst_node: str | None
    worst_relative: float


def validate_beta_martingale(d: BetaMartingale, depth: int,
                             tol: float = DEFAULT_TOL) -> BetaValidation:
    """Check ``d(w) = (1 - beta) d(w0) + beta d(w1)`` at all nodes of length < depth."""
    exact = d.rule.exact and d.bias.exact
    worst: Number = 0
    worst_node = None
    passed = True
    nodes = 0
    # relative excess at w: (1-b) d(w0)/d(w) + b d(w1)/d(w) - 1 = bet0 + bet1 - 1
    stack = [("", d.rule.start(), True)]
    while stack:
        w, st, alive = stack.pop()
        if len(w) >= depth:
            continue
        nodes += 1
        p0, p1 = d.rule.split(st)
        rel = p0 + p1 - 1
        if alive:
            ok = rel == 0 if exact else abs(float(rel)) <= tol
            passed &= bool(ok) and 0 <= p0 <= 1 and 0 <= p1 <= 1
            if abs(rel) > abs(worst):
                worst, worst_node = rel, w
        stack.append((w + "0", d.rule.advance(st, 0), alive and p0 > 0))
        stack.append((w + "1", d.rule.advance(st, 1), alive and p1 > 0))
    return BetaValidation(bool(passed), depth, nodes, worst_node, float(worst))
