"""Delta-type counting, parameter recipes and growth fits."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction as Q

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dplab.ict import PatternFormula
from dplab.parser import parse
from dplab.structures import PairDLO, PairPoint, SimpleDLO
from dplab.vc import (
    build_parameters, count_delta_types, count_types, delta_instances, fit_loglog,
    vc_density_profile,
)

S, PD = SimpleDLO(), PairDLO()
LT = [PatternFormula(parse("x < y"), "x", ("y",))]
PAIR_LT = [PatternFormula(parse("x.1 < y.1", PD.signature), "x", ("y",)),
           PatternFormula(parse("x.2 < y.2", PD.signature), "x", ("y",))]

small_rats = st.fractions(min_value=-4, max_value=4, max_denominator=2)


def _brute_simple(A):
    dom = [Q(k, 4) for k in range(-24, 25)]
    return len({tuple(c < a for a in A) for c in dom})


def _brute_pair(A):
    coords = [Q(k, 4) for k in range(-24, 25)]
    return len({tuple(c1 < a.first for a in A) + tuple(c2 < a.second for a in A)
                for c1 in coords for c2 in coords})


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_simple_counts(n):
    A = build_parameters(S, "uniform_grid", n)
    assert count_delta_types(S, LT, A).count == n + 1


@pytest.mark.parametrize("h", [4, 8, 16])
def test_pair_counts(h):
    A = build_parameters(PD, "ict_families", 2 * h)
    assert count_delta_types(PD, PAIR_LT, A).count == (h + 1) ** 2


@settings(max_examples=80, deadline=None)
@given(st.lists(small_rats, min_size=1, max_size=6, unique=True))
def test_simple_count_matches_dense_domain(A):
    assert count_delta_types(S, LT, A).count == _brute_simple(A)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(small_rats, small_rats), min_size=1, max_size=4, unique=True))
def test_pair_count_matches_dense_domain(raw):
    A = [PairPoint(a, b) for a, b in raw]
    assert count_delta_types(PD, PAIR_LT, A).count == _brute_pair(A)


@settings(max_examples=60, deadline=None)
@given(st.lists(small_rats, min_size=2, max_size=7, unique=True), st.data())
def test_count_monotone_in_parameters(A, data):
    k = data.draw(st.integers(1, len(A) - 1))
    assert count_delta_types(S, LT, A[:k]).count <= count_delta_types(S, LT, A).count


def test_two_variable_formula():
    between = [PatternFormula(parse("y1 < x & x < y2"), "x", ("y1", "y2"))]
    A = [Q(1), Q(2), Q(3)]
    assert len(delta_instances(between, A)) == 9
    # outside or on an endpoint: nothing; (1,2): {12,13}; x=2: {13}; (2,3): {13,23}
    assert count_delta_types(S, between, A).count == 4


def test_empty_inputs():
    assert count_delta_types(S, [], [Q(1)]).count == 1
    assert count_types(S, "x", []).count == 1
    assert count_delta_types(S, LT, []).count == 1


def test_delta_must_share_variable():
    with pytest.raises(ValueError):
        count_delta_types(S, LT + [PatternFormula(parse("z < y"), "z", ("y",))], [Q(0)])


def test_recipes():
    assert build_parameters(S, "uniform_grid", 3) == [1, 2, 3]
    fam = build_parameters(PD, "ict_families", 4)
    assert fam == [PairPoint(1, 1), PairPoint(2, 2), PairPoint(1, 2), PairPoint(2, 1)]
    r1 = build_parameters(PD, "random", 6, seed=3)
    assert r1 == build_parameters(PD, "random", 6, seed=3) and len(set(r1)) == 6
    with pytest.raises(ValueError):
        build_parameters(PD, "ict_families", 5)
    with pytest.raises(ValueError):
        build_parameters(S, "spiral", 4)
    with pytest.raises(ValueError):
        build_parameters(S, "uniform_grid", 0)


def test_fit_loglog():
    slope, _, res = fit_loglog([2, 4, 8], [4, 16, 64])
    assert math.isclose(slope, 2.0) and max(map(abs, res)) < 1e-12
    assert fit_loglog([1, 2], [7, 7])[0] == 0.0


def test_profile_slopes():
    prof = vc_density_profile(S, LT, [4, 8, 16, 32])
    assert prof.counts == [5, 9, 17, 33] and abs(prof.slope - 1) <= 0.15
    pair = vc_density_profile(PD, PAIR_LT, [8, 16, 32], recipe="ict_families")
    assert pair.counts == [25, 81, 289]
    # (N+1)^2 on N = 4..16 has log-log slope ln(289/25)/ln 4
    assert math.isclose(pair.slope, math.log(289 / 25) / math.log(4), rel_tol=1e-9)
    with pytest.raises(ValueError):
        vc_density_profile(S, LT, [8, 4])


def test_finer_grid_does_not_change_counts():
    A = [Q(1), Q(5, 2), Q(3)]
    coarse = count_delta_types(S, LT, A).count
    refined = len({tuple(c < a for a in A)
                   for c in itertools.chain(*[[Q(k, d) for k in range(-40, 41)] for d in (3, 7)])})
    assert coarse == refined == 4
