from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from effdim.bias import ConstantBias, sample_sequence
from effdim.errors import DomainError, StructuralError
from effdim.fsg import (
    FiniteStateGambler,
    account_log_capitals,
    constant_gambler,
    context_gambler,
    frequency_gambler,
    induced_gale,
    multi_account,
    parity_gambler,
    run_state,
    scaled_account_capitals,
    success_exponent_search,
)
from effdim.gales import evaluate, validate
from effdim.util import strings_up_to

half = st.fractions(0, 1, max_denominator=12)


@st.composite
def gamblers(draw, max_states=4, max_accounts=3):
    nq = draw(st.integers(1, max_states))
    states = [f"q{i}" for i in range(nq)]
    trans = {q: [draw(st.sampled_from(states)), draw(st.sampled_from(states))] for q in states}
    k = draw(st.integers(1, max_accounts))
    bets = []
    for _ in range(k):
        row = {}
        for q in states:
            p0 = draw(half)
            row[q] = [p0, 1 - p0]
        bets.append(row)
    caps = [draw(st.fractions(F(1, 8), 4, max_denominator=8)) for _ in range(k)]
    return FiniteStateGambler(states, trans, bets, states[0], caps)


# -- run_state --------------------------------------------------------------


def test_run_state_examples():
    G = parity_gambler("1/2", "1/2")
    assert run_state(G, "") == "even"
    assert run_state(G, "101") == "even" and run_state(G, "111") == "odd"
    assert run_state(constant_gambler(), "0110101") == "q"


def test_context_gambler_states():
    for order, nq in ((0, 1), (1, 2), (2, 4)):
        G = context_gambler(order)
        assert len(G.states) == nq
    G = context_gambler(2)
    assert run_state(G, "") == "00" and run_state(G, "1") == "01" and run_state(G, "0110") == "10"


# -- structure --------------------------------------------------------------


def test_structural_errors():
    with pytest.raises(StructuralError):
        FiniteStateGambler(["a"], {}, [{"a": ["1/2", "1/2"]}], "a", [1])
    with pytest.raises(StructuralError):
        FiniteStateGambler(["a"], {"a": ["a", "b"]}, [{"a": ["1/2", "1/2"]}], "a", [1])
    with pytest.raises(StructuralError):
        FiniteStateGambler(["a"], {"a": ["a", "a"]}, [{"a": ["1/2", "1/2"]}], "z", [1])
    with pytest.raises(StructuralError):
        FiniteStateGambler(["a"], {"a": ["a", "a"]}, [{}], "a", [1])


def test_problems_name_account_and_state():
    G = FiniteStateGambler(["a", "b"], {"a": ["b", "a"], "b": ["a", "b"]},
                           [{"a": ["1/2", "1/2"], "b": ["1/3", "1/3"]}], "a", [1])
    probs = G.problems()
    assert len(probs) == 1 and "account 1" in probs[0] and "state b" in probs[0]


def test_json_round_trip():
    G = multi_account([parity_gambler("1/3", "3/4"), context_gambler(1, {"1": "1/5"})], ["1/2", "2"])
    G2 = FiniteStateGambler.from_json(G.to_json())
    assert G2.to_json() == G.to_json()


# -- induced gale -----------------------------------------------------------


def test_even_gambler_is_constant_one():
    g = induced_gale(constant_gambler(), 1)
    assert list(evaluate(g, "0110100111").log_capitals) == [0.0] * 11


def test_all_in_on_zero():
    g = induced_gale(constant_gambler(1), 1)
    assert 2 ** g.log_capital("00") == 4.0
    assert g.log_capital("01") == -math.inf


@settings(max_examples=40, deadline=None)
@given(G=gamblers())
def test_random_gambler_induced_gale_validates_exactly(G):
    rep = validate(induced_gale(G, 1), 8, mode="exact")
    assert rep.passed and rep.worst_relative == 0


@settings(max_examples=5, deadline=None)
@given(G=gamblers(max_states=2, max_accounts=2))
def test_induced_gale_depth_sixteen(G):
    assert validate(induced_gale(G, F(1, 2)), 16, mode="exact").passed


@settings(max_examples=40, deadline=None)
@given(G=gamblers(), w=st.text("01", max_size=10), s=st.sampled_from([0, 1, 2]))
def test_total_is_sum_of_accounts(G, w, s):
    caps = oracles.fsg_accounts(G.states, G.transition, G.bets, G.start, G.capitals, s, w)
    assert [c * F(2) ** (s * len(w)) for c in scaled_account_capitals(G, w)] == caps
    g = induced_gale(G, s)
    assert g.scaled_capital(w) * F(2) ** (s * len(w)) == sum(caps)
    total = sum(caps)
    if total:
        assert g.log_capital(w) == pytest.approx(math.log2(total), abs=1e-9)
    per = account_log_capitals(G, s, w)[:, -1]
    for c, lc in zip(caps, per):
        assert (lc == -math.inf) if c == 0 else lc == pytest.approx(math.log2(c), abs=1e-9)


def test_multi_account_combines_capitals():
    a, b = parity_gambler("1/3", "3/4"), context_gambler(1, {"0": "1/5", "1": "2/3"})
    G = multi_account([a, b], [1, 3])
    for w in strings_up_to(7):
        sa = scaled_account_capitals(a, w)[0]
        sb = scaled_account_capitals(b, w)[0]
        assert scaled_account_capitals(G, w) == [sa, 3 * sb]


def test_negative_exponent_rejected():
    with pytest.raises(DomainError):
        induced_gale(constant_gambler(), -1)


# -- success exponent -------------------------------------------------------


def test_all_in_gambler_on_zeros():
    est = success_exponent_search(constant_gambler(1), "0" * 1024, "io")
    assert est.s <= 0.05
    est = success_exponent_search(constant_gambler(1), "0" * 1024, "ae")
    assert est.s <= 0.05


def test_even_gambler_threshold_near_one():
    w = sample_sequence(ConstantBias("1/3"), 2048, 5)
    for mode in ("io", "ae"):
        assert success_exponent_search(constant_gambler(), w, mode).s >= 0.998


def test_biased_gambler_recovers_entropy():
    w = sample_sequence(ConstantBias("1/4"), 20000, 2)
    G = constant_gambler("3/4")
    io = success_exponent_search(G, w, "io").s
    ae = success_exponent_search(G, w, "ae").s
    assert 0.78 < io <= ae < 0.86


def test_search_errors():
    with pytest.raises(DomainError):
        success_exponent_search(constant_gambler(capital=0), "0" * 64)
    with pytest.raises(DomainError):
        success_exponent_search(constant_gambler(), "0" * 63)
    with pytest.raises(DomainError):
        success_exponent_search(constant_gambler(), "0" * 64, "sometimes")


@settings(max_examples=30, deadline=None)
@given(G=gamblers(max_accounts=2), seed=st.integers(0, 1000), n=st.integers(64, 400))
def test_ae_at_least_io(G, seed, n):
    w = sample_sequence(ConstantBias("1/3"), n, seed)
    io = success_exponent_search(G, w, "io").s
    ae = success_exponent_search(G, w, "ae").s
    assert ae >= io


@pytest.mark.parametrize("mode", ["io", "ae"])
def test_antitone_in_extension_on_zeros(mode):
    G = constant_gambler("3/4")
    prev = 1.0
    for n in (64, 128, 256, 512, 1024, 4096):
        s = success_exponent_search(G, "0" * n, mode).s
        assert s <= prev
        prev = s


def test_frequency_gambler_bets():
    G = frequency_gambler("0001", order=0)
    assert G.bets[0][""] == (F(4, 6), F(2, 6))
    # zero padding makes the first context "0"
    G = frequency_gambler("0101", order=1)
    assert G.bets[0]["0"] == (F(2, 5), F(3, 5))
    assert G.bets[0]["1"] == (F(2, 3), F(1, 3))
