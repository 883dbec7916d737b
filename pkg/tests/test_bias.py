from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from effdim.bias import (
    BetaMartingale,
    ConstantBias,
    FunctionBias,
    TableBias,
    TowerBias,
    avg_entropy,
    bias_from_json,
    chernoff_alpha,
    chernoff_margin,
    deviation_tail_exact,
    deviation_tail_mc,
    entropy_envelope,
    log_star,
    measure,
    measure_exact,
    rationalize,
    sample_sequence,
    self_information,
    self_information_distribution,
    shannon_entropy,
    tower,
    validate_beta_martingale,
)
from effdim.errors import DomainError, ResourceError
from effdim.gales import ConstantRule, TableRule
from effdim.util import strings_up_to

# frozen reference values (mpmath, 40 digits)
H_QUARTER = 0.8112781244591328
AVG_HALF_QUARTER = 0.9056390622295664
TAILS_THIRD = {10: 0.5122694711172077, 50: 0.13261918150530200,
               100: 0.03326405124555799, 200: 0.002672621531953295}


def test_entropy_values():
    assert shannon_entropy(F(1, 4)) == pytest.approx(H_QUARTER, rel=1e-14)
    assert shannon_entropy(0.5) == 1.0
    assert shannon_entropy(0) == 0 and shannon_entropy(1) == 0
    assert avg_entropy(TableBias(["1/2", "1/4"]), 2) == pytest.approx(AVG_HALF_QUARTER, rel=1e-14)


def test_measure_examples():
    b = TableBias(["1/2", "1/4"], periodic=True)
    assert measure_exact(b, "10") == F(3, 8)
    assert measure_exact(ConstantBias("1/4"), "10") == F(3, 16)
    assert measure(ConstantBias("1/4"), "10") == pytest.approx(-2.415037499278844, rel=1e-14)
    s = self_information(ConstantBias("1/4"), "1111")
    assert s.deviation == pytest.approx(4.754887502163468, rel=1e-12)


@given(w=st.text("01", max_size=30), p=st.fractions(F(1, 20), F(19, 20), max_denominator=20))
def test_measure_matches_product(w, p):
    b = ConstantBias(p)
    assert measure_exact(b, w) == oracles.measure([p] * len(w), w)
    assert measure(b, w) == pytest.approx(math.log2(oracles.measure([p] * len(w), w)), abs=1e-9)


@given(n=st.integers(0, 8), p=st.fractions(F(1, 10), F(9, 10), max_denominator=10))
def test_measure_sums_to_one_per_level(n, p):
    b = TableBias([p, F(1, 2), 1 - p], periodic=True)
    assert sum(measure_exact(b, w) for w in oracles.strings(n)) == 1


def test_envelope_constant_and_alternating():
    lo, hi = entropy_envelope(ConstantBias("1/4"), 1000)
    assert lo == pytest.approx(H_QUARTER) and hi == pytest.approx(H_QUARTER)
    lo, hi = entropy_envelope(TableBias(["1/2", "1/4"], periodic=True), 1001)
    assert lo - 1e-12 <= AVG_HALF_QUARTER <= hi + 1e-12 and hi - lo < 1e-3


def test_tower_and_log_star():
    assert [tower(j) for j in range(5)] == [1, 2, 4, 16, 65536]
    assert [log_star(n) for n in (0, 1, 2, 3, 4, 5, 16, 17, 65536, 65537)] == [0, 0, 1, 2, 2, 3, 3, 4, 4, 5]
    with pytest.raises(DomainError):
        tower(6)


def test_tower_bias_vectorised_matches_pointwise():
    b = TowerBias("1/3", "1/5")
    n = 70000
    v = b.values(n)
    for i in list(range(40)) + [65535, 65536, 65537, 69999]:
        assert v[i] == float(b.value(i))


def test_json_round_trip():
    for b in (ConstantBias("1/3"), TableBias(["1/2", "1/7"], periodic=True), TowerBias("1/4", "1/2")):
        b2 = bias_from_json(b.to_json())
        assert [b2.value(i) for i in range(20)] == [b.value(i) for i in range(20)]


def test_table_bias_length_enforced():
    with pytest.raises(DomainError):
        TableBias(["1/2"]).value(1)


# -- sampling ---------------------------------------------------------------


def test_sampling_deterministic_and_prefix_consistent():
    b = ConstantBias("1/4")
    a = sample_sequence(b, 5000, 7)
    assert a == sample_sequence(b, 5000, 7)
    assert sample_sequence(b, 1234, 7) == a[:1234]
    assert a != sample_sequence(b, 5000, 8)


def test_sampling_frequency():
    w = sample_sequence(ConstantBias("1/4"), 200000, 1)
    assert abs(w.count("1") / len(w) - 0.25) < 0.005


def test_sampling_rejects_degenerate_bias():
    with pytest.raises(DomainError):
        sample_sequence(ConstantBias(1), 10, 0)


# -- deviation tails --------------------------------------------------------


@pytest.mark.parametrize("n", sorted(TAILS_THIRD))
def test_exact_tail_frozen_values(n):
    r = deviation_tail_exact(ConstantBias("1/3"), n, 0.1)
    assert r.probability == pytest.approx(TAILS_THIRD[n], rel=1e-9, abs=1e-12)
    assert r.error_bits == n * 2 ** -20


def test_exact_tail_single_bit():
    r = deviation_tail_exact(ConstantBias("1/4"), 1, 0.5)
    assert r.probability == pytest.approx(0.25)


@settings(max_examples=12, deadline=None)
@given(n=st.integers(1, 60), p=st.sampled_from([F(1, 3), F(1, 4), F(2, 5), F(1, 10)]),
       eps=st.sampled_from([0.05, 0.1, 0.3]))
def test_exact_tail_matches_binomial_oracle(n, p, eps):
    got = deviation_tail_exact(ConstantBias(p), n, eps).probability
    want = float(oracles.tail_binomial(p, n, eps))
    assert got == pytest.approx(want, abs=1e-9)


def test_distribution_half_bias_collapses_to_one_point():
    keys, probs = self_information_distribution(ConstantBias("1/2"), 30)
    assert keys.tolist() == [30 * 2 ** 20] and probs.tolist() == pytest.approx([1.0])


def test_distribution_sums_to_one_non_constant():
    b = TableBias(["1/2", "1/3", "1/5"], periodic=True)
    keys, probs = self_information_distribution(b, 90)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    mean = (keys / 2 ** 20 * probs).sum()
    assert mean == pytest.approx(90 * avg_entropy(b, 90), abs=90 * 2 ** -20 + 1e-9)


def test_dp_budget():
    with pytest.raises(ResourceError):
        deviation_tail_exact(ConstantBias("1/3"), 5000, 0.1)


def test_mc_agrees_with_exact():
    b = ConstantBias("1/3")
    mc = deviation_tail_mc(b, 50, 0.1, 20000, 3)
    ex = deviation_tail_exact(b, 50, 0.1).probability
    assert abs(mc.estimate - ex) <= 4 * mc.stderr
    assert deviation_tail_mc(b, 50, 0.1, 500, 3) == deviation_tail_mc(b, 50, 0.1, 500, 3)


# -- chernoff ---------------------------------------------------------------


@pytest.mark.parametrize("delta,eps,alpha", [
    ("1/3", 0.1, 0.98928673683),
    (0.25, 0.1, 0.99493329521),
    (0.25, 0.2, 0.98080822735),
])
def test_chernoff_alpha_frozen(delta, eps, alpha):
    theta, a = chernoff_alpha(F(delta) if isinstance(delta, str) else delta, eps)
    assert a == pytest.approx(alpha, abs=1e-8)
    assert 0 < a < 1
    assert chernoff_margin(theta, float(F(delta)) if isinstance(delta, str) else delta, eps) > 0


@pytest.mark.parametrize("theta", [0.05, 0.1, 0.2])
def test_chernoff_margin_matches_oracle(theta):
    got = chernoff_margin(theta, 0.25, 0.1)
    want = float(oracles.chernoff_margin(theta, 0.25, 0.1))
    assert got == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("n", [50, 100, 200])
def test_tail_below_chernoff_bound(n):
    _, a = chernoff_alpha(F(1, 3), 0.1)
    assert deviation_tail_exact(ConstantBias("1/3"), n, 0.1).probability <= 2 * a ** n


def test_chernoff_domain():
    with pytest.raises(DomainError):
        chernoff_alpha(0.6, 0.1)
    with pytest.raises(DomainError):
        chernoff_alpha(0.25, 0)


# -- rationalization --------------------------------------------------------


def _approx_third(i, r):
    # truncated binary expansion of 1/3 + 1/(i+7)
    x = F(1, 3) + F(1, i + 7)
    return F(math.floor(x * 2 ** r), 2 ** r)


def test_rationalize_bounds_and_square_sum():
    true = FunctionBias(lambda i: F(1, 3) + F(1, i + 7), (F(1, 3), F(1, 2)))
    r = rationalize(_approx_third, F(1, 4), beta=true)
    assert r.m == 4
    for i in range(200):
        v = r.beta.value(i)
        assert isinstance(v, F) and F(1, 8) <= v <= F(3, 4)
    assert r.square_sum <= r.square_bound


@given(d=st.fractions(F(1, 100), F(1, 2), max_denominator=100))
def test_rationalize_m(d):
    m = rationalize(lambda i, r: F(1, 2), d).m
    assert F(2) ** (m - 2) >= 1 / d > F(2) ** (m - 3)


# -- beta martingales -------------------------------------------------------


def test_beta_martingale_even_bets_validate():
    b = TableBias(["1/3", "1/2"], periodic=True)
    d = BetaMartingale(b, ConstantRule(F(1, 2)))
    assert validate_beta_martingale(d, 8).passed
    bad = BetaMartingale(b, ConstantRule(F(1, 2), F(1, 3)))
    assert not validate_beta_martingale(bad, 4).passed


@settings(max_examples=20, deadline=None)
@given(data=st.data())
def test_beta_martingale_averaging(data):
    p = data.draw(st.sampled_from([F(1, 3), F(1, 5), F(3, 4)]))
    table = {}
    for w in strings_up_to(3):
        x = data.draw(st.fractions(0, 1, max_denominator=8))
        table[w] = (x, 1 - x)
    d = BetaMartingale(ConstantBias(p), TableRule(table))
    for w in strings_up_to(3):
        r = d.ratio_exact(w)
        if r:
            assert (1 - p) * d.ratio_exact(w + "0") + p * d.ratio_exact(w + "1") == r


def test_beta_martingale_measure_ratio():
    # betting mu_gamma against mu_beta gives mu_gamma(w) / mu_beta(w)
    beta, gamma = ConstantBias("1/3"), ConstantBias("1/2")
    d = BetaMartingale(beta, ConstantRule(F(1, 2)))
    for w in ("", "0", "1101", "000111"):
        assert d.ratio_exact(w) == measure_exact(gamma, w) / measure_exact(beta, w)
        assert d.log_capital(w) == pytest.approx(math.log2(d.ratio_exact(w)))


def test_self_information_vector_consistent():
    w = sample_sequence(TowerBias("1/3", "1/5"), 3000, 4)
    s = self_information(TowerBias("1/3", "1/5"), w)
    assert s.L_n == pytest.approx(-measure(TowerBias("1/3", "1/5"), w))
    assert np.isfinite(s.deviation)
