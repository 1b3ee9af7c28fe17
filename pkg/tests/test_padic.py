"""p-adic approximations, RV_k, power cosets and the cell-like search."""

from __future__ import annotations

import random
from fractions import Fraction as Q

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dplab import padic
from dplab.padic import (
    CellSpec, PadicApprox, PrecisionError, RV_INF, check_celllike, check_prop61,
    coset_representatives, find_celllike_k, hensel_modulus_exponent, in_annulus, in_cell,
    parse_padic, pi_k, power_cosets, vp,
)
from dplab.parser import parse
from oracles import brute_celllike_k

PREC = 16
primes = st.sampled_from([2, 3, 5])
ints = st.integers(-10**6, 10**6)


def _v(p, n):
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k, n


def _pi_oracle(p, n, k):
    """RV_k class of a nonzero integer straight from its factorisation."""
    v, u = _v(p, n)
    return v, u % p ** k


# ---------------------------------------------------------------- arithmetic

@settings(max_examples=300, deadline=None)
@given(primes, ints, ints)
def test_ring_ops_match_integers(p, a, b):
    A, B = PadicApprox.from_int(p, a, PREC), PadicApprox.from_int(p, b, PREC)
    for got, want in ((A + B, a + b), (A - B, a - b), (A * B, a * b)):
        if want == 0:
            assert got.is_zero()
            continue
        v, u = _v(p, want)
        if got.is_zero():
            # cancellation ate all known digits
            assert got.precision <= v
            continue
        assert got.valuation == v
        assert got.unit % p ** got.precision == u % p ** got.precision


@settings(max_examples=200, deadline=None)
@given(primes, st.fractions(max_denominator=200).filter(bool))
def test_from_rational_inverts(p, q):
    x = PadicApprox.from_rational(p, q, PREC)
    assert x.valuation == vp(p, q.numerator) - vp(p, q.denominator)
    den = PadicApprox.from_int(p, q.denominator, PREC)
    back = x * den
    v, u = _v(p, q.numerator)
    assert back.valuation == v and back.unit % p ** back.precision == u % p ** back.precision


def test_zero_handling_and_precision():
    p = 3
    x = PadicApprox.from_int(p, 5, 4)
    d = x - PadicApprox.from_int(p, 5 + 81 * 7, 4)
    assert d.is_zero() and d.precision == 4
    with pytest.raises(PrecisionError):
        d.residue(1)
    with pytest.raises(PrecisionError):
        x.residue(5)
    assert (x + PadicApprox.zero(p)) == x
    with pytest.raises(ValueError):
        PadicApprox(p, 0, 3, 4)


def test_parse_padic():
    assert parse_padic("3^2 * 4", 3, 6) == PadicApprox.from_int(3, 36, 6)
    assert parse_padic("1/3", 3, 6).valuation == -1
    with pytest.raises(ValueError):
        parse_padic("5^1 * 2", 3, 6)


# ---------------------------------------------------------------- RV_k

def test_pi_k_examples():
    x, y = PadicApprox.from_int(3, 4, 8), PadicApprox.from_int(3, 1, 8)
    assert pi_k(x, 1) == pi_k(y, 1)
    assert pi_k(x, 2) != pi_k(y, 2)
    assert pi_k(PadicApprox.zero(3), 2) == RV_INF
    with pytest.raises(ValueError):
        pi_k(x, 0)


@settings(max_examples=300, deadline=None)
@given(primes, ints.filter(bool), ints.filter(bool), st.integers(1, 5))
def test_pi_k_matches_factorisation(p, a, b, k):
    A, B = PadicApprox.from_int(p, a, PREC), PadicApprox.from_int(p, b, PREC)
    assert (pi_k(A, k) == pi_k(B, k)) == (_pi_oracle(p, a, k) == _pi_oracle(p, b, k))
    # pi_{k+1} refines pi_k
    if pi_k(A, k + 1) == pi_k(B, k + 1):
        assert pi_k(A, k) == pi_k(B, k)


@settings(max_examples=300, deadline=None)
@given(primes, ints, ints, ints, st.integers(1, 4))
def test_prop61_against_integer_oracle(p, x, y, z, k):
    assume(x != z and y != z)
    X, Y, Z = (PadicApprox.from_int(p, t, 40) for t in (x, y, z))
    lhs = _pi_oracle(p, x - z, k) == _pi_oracle(p, y - z, k)
    rhs = x == y or vp(p, x - y) >= vp(p, y - z) + k
    assert lhs == rhs
    assert check_prop61(X, Y, Z, k)


def test_prop61_undecidable_raises():
    p = 2
    z = PadicApprox.from_int(p, 0, 4)
    x = PadicApprox(p, 0, 1, 4)
    y = PadicApprox(p, 0, 1 + 16, 8)
    with pytest.raises(PrecisionError):
        check_prop61(x, y, z, 5)


def test_prop61_suite_small():
    rows = padic.prop61_suite((3,), (1, 2), 12, 500, seed=9)
    assert all(dec == ok for _, _, dec, ok, _ in rows)
    assert sum(r[2] for r in rows) > 900


# ---------------------------------------------------------------- cosets

@pytest.mark.parametrize("p,n,count", [
    (2, 2, 8), (2, 3, 3), (2, 4, 32), (3, 2, 4), (3, 3, 9), (3, 4, 8), (5, 2, 4), (5, 3, 3),
    (5, 4, 16),
])
def test_coset_counts(p, n, count):
    # index of P_n in Q_p^x is n * p^v(n) * |mu_n(Q_p)|
    mu = sum(1 for u in range(1, p ** 3) if u % p and pow(u, n, p ** 3) == 1 and _root_lifts(p, n, u))
    assert power_cosets(p, n).count() == count == n * p ** vp(p, n) * mu


def _root_lifts(p, n, u):
    # u mod p^3 is the residue of an n-th root of unity in Z_p (Teichmuller or +-1)
    return pow(u, p ** 6, p ** 3) == u or (p == 2 and u in (1, 7))


def test_hensel_exponent():
    assert [hensel_modulus_exponent(2, n) for n in (1, 2, 3, 4)] == [1, 3, 1, 5]
    assert hensel_modulus_exponent(3, 3) == 3


def test_representatives_cover_distinct_cosets():
    for p, n in ((2, 2), (3, 2), (5, 3)):
        pc = power_cosets(p, n)
        reps = coset_representatives(p, n)
        keys = {pc.key(vp(p, r), r // p ** vp(p, r)) for r in reps}
        assert len(keys) == len(reps) == pc.count()
        assert reps[0] == 1


@settings(max_examples=200, deadline=None)
@given(primes, st.integers(2, 4), st.integers(1, 2000))
def test_nth_powers_are_in_P_n(p, n, w):
    assume(w % p)
    z = PadicApprox.from_int(p, w ** n, 20)
    assert power_cosets(p, n).is_nth_power(z)


def test_contains_conventions():
    pc = power_cosets(3, 2)
    assert pc.contains(1, PadicApprox.zero(3))
    assert pc.contains(0, PadicApprox.zero(3))
    assert not pc.contains(0, PadicApprox.from_int(3, 1, 6))
    with pytest.raises(PrecisionError):
        pc.contains(1, PadicApprox.zero(3, 5))
    assert pc.contains(2, PadicApprox.from_int(3, 2, 6))
    assert not pc.contains(1, PadicApprox.from_int(3, 2, 6))


# ---------------------------------------------------------------- cells

def test_cells():
    c = PadicApprox.from_int(3, 1, 10)
    cell = CellSpec(c, gamma=3, delta=1, n=2, lam=1)
    assert in_cell(PadicApprox.from_int(3, 1 + 9, 10), cell)
    assert not in_cell(PadicApprox.from_int(3, 1 + 3 * 9, 10), cell)   # v = 3, odd
    assert not in_cell(PadicApprox.from_int(3, 1 + 2 * 9, 10), cell)   # unit 2 is a non-square
    assert not in_cell(PadicApprox.from_int(3, 2, 10), cell)
    assert in_annulus(PadicApprox.zero(3), padic.INF, 0)
    with pytest.raises(ValueError):
        CellSpec(c, gamma=0, delta=2)


@pytest.mark.parametrize("p,n", [(p, n) for p in (2, 3, 5) for n in (2, 3, 4)])
def test_celllike_k_matches_brute_force(p, n):
    r = find_celllike_k(p, n)
    assert r.k == brute_celllike_k(p, n)
    assert r.verified_modulus == p ** max(r.k + 2, hensel_modulus_exponent(p, n))
    if r.k > 1:
        assert r.violations_at_k_minus_1 > 0
    else:
        assert r.violations_at_k_minus_1 is None


def test_celllike_frozen_values():
    got = {(p, n): find_celllike_k(p, n).k for p in (2, 3, 5) for n in (2, 3, 4)}
    assert got == {(2, 2): 3, (2, 3): 1, (2, 4): 4, (3, 2): 1, (3, 3): 2, (3, 4): 1,
                   (5, 2): 1, (5, 3): 1, (5, 4): 1}
    assert find_celllike_k(7, None).k == 1


def test_celllike_bound_exhausted():
    with pytest.raises(padic.BoundExhausted):
        find_celllike_k(2, 4, max_k=2)


def test_check_celllike_on_formulas():
    s = padic.PadicStructure(3, 12)
    cell = parse("Ann(x - y0, 2, 0) & Pow(2, 1, x - y0)", s.signature)
    assert check_celllike(cell, 1, samples=1500, seed=1).ok
    # a ball around y0 + 1 is not cell-like around y0 at k = 1
    ball = parse("Ann(x - y0 - 1, inf, 2)", s.signature)
    rep = check_celllike(ball, 1, samples=1500, seed=1)
    assert not rep.ok and rep.violations
    # equality is never decidable on approximations: every sample is skipped
    eq = check_celllike(parse("x = y0 + 1", s.signature), 3, samples=200, seed=1)
    assert eq.violation_count == 0 and eq.skipped > 0
    assert check_celllike(parse("Ann(x - y0, 0, 0)", s.signature), 1, samples=500).ok


def test_check_celllike_seeded():
    s = padic.PadicStructure(3, 12)
    phi = parse("Pow(2, 2, x - y0) | vle(x - y0, y1)", s.signature)
    a, b = check_celllike(phi, 1, samples=400, seed=7), check_celllike(phi, 1, samples=400, seed=7)
    assert (a.tested, a.skipped, a.violation_count) == (b.tested, b.skipped, b.violation_count)


def test_random_padic_units():
    rng = random.Random(2)
    for _ in range(300):
        x = padic.random_padic(rng, 5, 6)
        assert x.unit % 5 and 0 <= x.valuation <= 3


def test_scale_by_rational():
    x = PadicApprox.from_int(5, 10, 8)
    assert x.scale(Q(1, 5)) == PadicApprox.from_int(5, 2, 8)
