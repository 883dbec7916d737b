from __future__ import annotations

import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from effdim.bias import BetaMartingale, ConstantBias, TableBias, sample_sequence, validate_beta_martingale
from effdim.errors import DomainError
from effdim.dilation import (
    characteristic,
    characteristic_sparse,
    dilate_bias,
    dilate_martingale,
    g_k,
    g_map,
    identity_map,
    index,
    parse_map,
    preimage_characteristic,
    restrict,
    restrict_to_range,
    string,
    transfer_check,
)
from effdim.gales import ConstantRule, TableRule
from effdim.util import strings_up_to

words = st.text("01", max_size=10)


# -- enumeration ------------------------------------------------------------


def test_enumeration_start():
    assert [string(n) for n in range(8)] == ["", "0", "1", "00", "01", "10", "11", "000"]
    assert oracles.standard_order(3) == [string(n) for n in range(15)]


@given(w=st.text("01", max_size=40))
def test_enumeration_bijective(w):
    assert string(index(w)) == w


@given(n=st.integers(0, 10 ** 12))
def test_index_string_inverse(n):
    assert index(string(n)) == n


# -- restriction ------------------------------------------------------------


def test_restrict_examples():
    assert restrict("1010", lambda i: True) == "1010"
    assert restrict("1010", lambda i: False) == ""
    assert restrict("1010", lambda i: i in (0, 2)) == "11"


@settings(max_examples=60)
@given(w=st.text("01", max_size=30), members=st.sets(st.integers(0, 30)))
def test_restrict_matches_recursive_definition(w, members):
    member_strings = {string(i) for i in members}
    got = restrict(w, lambda i: string(i) in member_strings)
    assert got == oracles.restrict_recursive(w, member_strings)
    assert len(got) == sum(1 for i in range(len(w)) if i in members)


# -- g_k --------------------------------------------------------------------


def test_g_k_examples():
    assert g_k("", 1) == "1" and g_k("", 3) == "1"
    assert g_k("1", 2) == "011"
    assert g_k("10", 2) == "0000110"
    with pytest.raises(DomainError):
        g_k("0", 0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_g_k_strictly_increasing_exhaustive(k):
    xs = oracles.standard_order(8)
    images = [index(g_k(x, k)) for x in xs]
    assert all(a < b for a, b in zip(images, images[1:]))
    assert g_map(k).check_monotone(8) == []


def test_parse_map():
    assert parse_map("identity")("0110") == "0110"
    assert parse_map("g_k:2")("10") == "0000110"
    with pytest.raises(DomainError):
        parse_map("shift")


@pytest.mark.parametrize("k", [1, 2])
def test_preimage_and_range(k):
    f = g_map(k)
    pos = f.range_positions(5000)
    assert pos == [f.n_f(n) for n in range(len(pos))]
    S = set(pos)
    for m in range(5000):
        pre = f.preimage(m)
        assert (pre is not None) == (m in S)
        if pre is not None:
            assert f.n_f(pre) == m


# -- dilation ---------------------------------------------------------------


def test_dilate_bias_examples():
    beta = TableBias(["1/2", "1/3", "1/5", "1/7"], periodic=True)
    same = dilate_bias(beta, identity_map())
    assert [same.value(i) for i in range(12)] == [beta.value(i) for i in range(12)]
    const = dilate_bias(ConstantBias("1/3"), g_map(2))
    assert all(const.value(i) == F(1, 3) for i in range(20))
    # index(g_1("")) = index("1") = 2
    assert dilate_bias(beta, g_map(1)).value(0) == beta.value(2)


def test_dilate_identity_is_same_martingale():
    beta = TableBias(["1/3", "1/2"], periodic=True)
    d = BetaMartingale(beta, TableRule({"": (F(1, 4), F(3, 4)), "1": (F(2, 3), F(1, 3))}))
    fd = dilate_martingale(d, identity_map(), beta)
    for w in strings_up_to(6):
        assert fd.ratio_exact(w) == d.ratio_exact(w)


def test_dilate_constant_martingale():
    beta = ConstantBias("1/3")
    # bets equal to the conditionals keep the capital constant
    d = BetaMartingale(dilate_bias(beta, g_map(2)), ConstantRule(F(2, 3)), 1.5)
    fd = dilate_martingale(d, g_map(2), beta)
    for w in strings_up_to(7):
        assert fd.ratio_exact(w) == 1
    assert fd.log_capital("0110111") == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_dilated_martingale_validates(k):
    beta = TableBias(["1/3", "1/2", "1/5"], periodic=True)
    f = g_map(k)
    inner = BetaMartingale(dilate_bias(beta, f), TableRule({"": (F(1, 4), F(3, 4)), "0": (F(1), F(0))}))
    assert validate_beta_martingale(dilate_martingale(inner, f, beta), 10).passed


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.sampled_from([1, 2]))
def test_dilation_defining_equation(seed, k):
    rnd = random.Random(seed)
    beta = ConstantBias("1/3")
    f = g_map(k)
    table = {}
    for w in strings_up_to(4):
        x = F(rnd.randint(0, 8), 8)
        table[w] = (x, 1 - x)
    d = BetaMartingale(dilate_bias(beta, f), TableRule(table))
    fd = dilate_martingale(d, f, beta)
    w = "".join(rnd.choice("01") for _ in range(40))
    for m in range(len(w) + 1):
        assert fd.ratio_exact(w[:m]) == d.ratio_exact(restrict_to_range(w[:m], f))


def test_transfer_check_on_sample():
    beta = ConstantBias("1/3")
    f = g_map(1)
    d = BetaMartingale(dilate_bias(beta, f), ConstantRule(F(1, 2)))
    S = sample_sequence(beta, 3000, 12)
    rows = transfer_check(d, f, beta, S, [100, 500, 1000, 3000], exact=True)
    assert all(r.equal and r.exact_equal for r in rows)
    assert [r.restricted_length for r in rows] == [len(f.range_positions(m)) for m in (100, 500, 1000, 3000)]


# -- characteristic sequences of preimages -----------------------------------


def _random_language(rnd, f, n, size):
    """A finite language mixing images of f with arbitrary strings."""
    imgs = [f(string(rnd.randrange(n))) for _ in range(size)]
    other = [string(rnd.randrange(2 ** 8)) for _ in range(size)]
    return set(imgs + other)


@pytest.mark.parametrize("seed", range(10))
def test_preimage_characteristic_dense(seed):
    # dense brute force: both sides materialised as ordinary strings
    rnd = random.Random(seed)
    f = g_map(1)
    for n in range(0, 40):
        A = _random_language(rnd, f, 40, 6)
        nf = f.n_f(n) if n else 0
        chi_A = characteristic(lambda x: x in A, nf)
        left = preimage_characteristic(A, f, n)
        right = restrict(chi_A, lambda i: f.in_range(i))
        assert left == right


@pytest.mark.parametrize("seed", range(10))
def test_preimage_characteristic_sparse_g2(seed):
    # n_f reaches about 2^43 at n = 64, so chi_A is handled sparsely
    rnd = random.Random(seed)
    f = g_map(2)
    for n in (1, 2, 5, 17, 33, 64):
        A = _random_language(rnd, f, 64, 8)
        length = f.n_f(n - 1) + 1
        chi = characteristic_sparse(A, length)
        right = restrict_to_range(chi, f)
        assert preimage_characteristic(A, f, n) == right
