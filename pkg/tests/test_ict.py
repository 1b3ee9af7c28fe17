"""ICT and inp certificates, refinement, fusion and breakpoint profiles."""

from __future__ import annotations

import itertools
from fractions import Fraction as Q

import pytest

from dplab.ict import (
    BudgetError, CertificateError, ICTCertificate, Limits, PatternFormula, breakpoint_profile,
    build_inp_certificate, check_ict_certificate, check_inp_certificate, fuse_single_formula,
    refine_disjunct, search_ict,
)
from dplab.parser import parse
from dplab.structures import PairDLO, PairPoint, SimpleDLO
from dplab.vc import count_types

P = PairPoint
S, PD = SimpleDLO(), PairDLO()


def pat(struct, text, params=("y1", "y2")):
    return PatternFormula(parse(text, struct.signature), "x", params)


INTERVAL = pat(S, "y1 < x & x < y2")
PHI1 = pat(PD, "y1.1 < x.1 & x.1 < y2.1")
PSI2 = pat(PD, "y1.2 < x.2 & x.2 < y2.2")
PHI_OR = pat(PD, "(y1.1 < x.1 & x.1 < y2.1) | (y1.2 < x.1 & x.1 < y2.2)")


def strips(k):
    return [(P(2 * i, 2 * i), P(2 * i + 1, 2 * i + 1)) for i in range(k)]


def all_intervals(points):
    pts = [Q(p) for p in points]
    return [(a, b) for i, a in enumerate(pts) for b in pts[i + 1:]]


# ---------------------------------------------------------------- checker

def test_valid_and_invalid_witnesses():
    a = [(Q(0), Q(1)), (Q(2), Q(3))]
    good = ICTCertificate(S, INTERVAL, INTERVAL, a, a, [[Q(1, 2), None], [None, Q(5, 2)]])
    assert not check_ict_certificate(good)  # off-diagonal cells cannot be filled on a line
    diag = ICTCertificate(S, INTERVAL, INTERVAL, a[:1], a[:1], [[Q(1, 2)]])
    assert check_ict_certificate(diag)
    bad = ICTCertificate(S, INTERVAL, INTERVAL, a[:1], a[:1], [[Q(2)]])
    assert not check_ict_certificate(bad)
    ragged = ICTCertificate(S, INTERVAL, INTERVAL, a[:1], a[:1], [[]])
    assert not check_ict_certificate(ragged)


def test_pattern_rejects_stray_variables():
    with pytest.raises(ValueError):
        PatternFormula(parse("x < z"), "x", ("y",))


# ---------------------------------------------------------------- search

def _brute_simple_ict_exists(pool, m, n):
    """Independent check on (Q,<): a fine grid of eighths suffices for
    intervals with integer endpoints, and membership is computed directly."""
    pts = [Q(k, 8) for k in range(-8, 49)]
    inside = [[a < c < b for (a, b) in pool] for c in pts]
    for rows in itertools.combinations(range(len(pool)), m):
        for cols in itertools.combinations(range(len(pool)), n):
            cells = set()
            for flags in inside:
                r = [i for i in rows if flags[i]]
                c = [j for j in cols if flags[j]]
                if len(r) == 1 and len(c) == 1:
                    cells.add((r[0], c[0]))
            if len(cells) == m * n:
                return True
    return False


def test_simple_dlo_has_no_2x2_pattern():
    pool = all_intervals(range(6))
    assert len(pool) == 15
    assert search_ict(S, INTERVAL, INTERVAL, pool, pool, 2, 2, limits=Limits(max_pool=15)) is None
    assert not _brute_simple_ict_exists(pool, 2, 2)


def test_simple_dlo_1x1_and_1x2_exist():
    pool = all_intervals(range(4))
    cert = search_ict(S, INTERVAL, INTERVAL, pool, pool, 1, 2)
    assert cert is not None and check_ict_certificate(cert)
    assert _brute_simple_ict_exists(pool, 1, 2)


def _direct_pair_check(cert):
    # cell (i, j): x.1 in row interval i only, x.2 in column interval j only
    for i, row in enumerate(cert.witnesses):
        for j, c in enumerate(row):
            in_a = [k for k, (lo, hi) in enumerate(cert.a_params) if lo.first < c.first < hi.first]
            in_b = [k for k, (lo, hi) in enumerate(cert.b_params) if lo.second < c.second < hi.second]
            if in_a != [i] or in_b != [j]:
                return False
    return True


def test_pair_dlo_4x4_found_and_verified():
    cert = search_ict(PD, PHI1, PSI2, strips(6), strips(6), 4, 4)
    assert cert is not None and cert.shape == (4, 4)
    assert check_ict_certificate(cert) and _direct_pair_check(cert)
    assert cert.a_params == strips(4)  # lexicographic first selection
    inst = [(PHI1, a) for a in cert.a_params] + [(PSI2, b) for b in cert.b_params]
    assert count_types(PD, "x", inst).count >= 16


def test_search_is_independent_of_workers():
    one = search_ict(PD, PHI1, PSI2, strips(5), strips(5), 3, 3, workers=1)
    two = search_ict(PD, PHI1, PSI2, strips(5), strips(5), 3, 3, workers=2)
    assert one.to_dict() == two.to_dict()


def test_search_budgets():
    with pytest.raises(BudgetError):
        search_ict(PD, PHI1, PSI2, strips(9), strips(2), 1, 1)
    with pytest.raises(BudgetError):
        search_ict(PD, PHI1, PSI2, strips(8), strips(8), 7, 7, limits=Limits(max_pool=8))
    with pytest.raises(BudgetError):
        search_ict(PD, PHI1, PSI2, strips(8), strips(8), 4, 4, limits=Limits(max_selections=10))
    with pytest.raises(ValueError):
        search_ict(PD, PHI1, PSI2, strips(2), strips(2), 0, 1)
    assert search_ict(PD, PHI1, PSI2, strips(1), strips(2), 2, 2) is None


def test_certificate_round_trip():
    cert = search_ict(PD, PHI1, PSI2, strips(4), strips(4), 2, 3)
    back = ICTCertificate.from_dict(cert.to_dict())
    assert back.to_dict() == cert.to_dict()
    assert check_ict_certificate(back)


# ---------------------------------------------------------------- refinement

def test_refine_keeps_all_rows():
    pool_a = [(P(2 * i, 100), P(2 * i + 1, 101)) for i in range(4)]
    cert = search_ict(PD, PHI_OR, PSI2, pool_a, strips(4), 4, 4)
    ref = refine_disjunct(cert)
    assert ref.index == 1 and ref.rows == [0, 1, 2, 3] and ref.note == ""
    assert check_ict_certificate(ref.certificate)


def test_refine_second_disjunct():
    # only the second disjunct is non-empty on these rows
    pool_a = [(P(100, 2 * i), P(101, 2 * i + 1)) for i in range(3)]
    cert = search_ict(PD, PHI_OR, PSI2, pool_a, strips(3), 3, 3)
    assert refine_disjunct(cert).index == 2


def test_refine_split_rows():
    # row 1 lives in the first disjunct, row 2 in the second
    pool_a = [(P(0, 5), P(1, 5)), (P(5, 10), P(5, 11))]
    cert = search_ict(PD, PHI_OR, PSI2, pool_a, strips(2), 2, 2)
    assert cert is not None
    with pytest.raises(CertificateError):
        refine_disjunct(cert)
    ref = refine_disjunct(cert, min_rows=1)
    assert ref.index == 1 and ref.rows == [0] and "dropped 1" in ref.note


def test_refine_rejects_invalid_input():
    a = [(P(0, 0), P(1, 1))]
    cert = ICTCertificate(PD, PHI1, PSI2, a, a, [[P(5, 5)]])
    with pytest.raises(CertificateError):
        refine_disjunct(cert)


# ---------------------------------------------------------------- fusion

def test_fusion_4x4_to_2x2():
    cert = search_ict(PD, PHI1, PSI2, strips(4), strips(4), 4, 4)
    fused = fuse_single_formula(cert)
    assert fused.shape == (2, 2) and check_ict_certificate(fused)
    assert fused.phi == fused.psi
    assert fused.phi.params == ("y1", "y2", "y1'", "y2'")


def test_fusion_2x2_to_1x1():
    cert = search_ict(PD, PHI1, PSI2, strips(2), strips(2), 2, 2)
    fused = fuse_single_formula(cert)
    assert fused.shape == (1, 1) and check_ict_certificate(fused)


def test_fusion_shape_errors():
    cert = search_ict(PD, PHI1, PSI2, strips(3), strips(3), 3, 3)
    with pytest.raises(CertificateError):
        fuse_single_formula(cert)


# ---------------------------------------------------------------- inp

def test_inp_disjoint_strips_valid():
    rows = strips(3)
    cert = build_inp_certificate(PD, PHI1, PSI2, rows, rows, 2, 2)
    assert check_inp_certificate(cert) and cert.subsets_checked == 6


def test_inp_overlapping_strips_invalid():
    rows = [(P(0, 0), P(3, 3)), (P(2, 2), P(5, 5)), (P(4, 4), P(7, 7))]
    cert = build_inp_certificate(PD, PHI1, PSI2, rows, rows, 2, 2)
    assert cert is not None and not check_inp_certificate(cert)
    # all three never meet, so 3-inconsistency holds
    assert check_inp_certificate(build_inp_certificate(PD, PHI1, PSI2, rows, rows, 3, 3))


def test_inp_empty_pair_gives_none():
    rows = [(P(0, 0), P(0, 0))]
    assert build_inp_certificate(PD, PHI1, PSI2, rows, strips(1), 2, 2) is None


def test_inp_budget():
    rows = strips(12)
    cert = build_inp_certificate(PD, PHI1, PSI2, rows[:2], rows[:2], 2, 2)
    cert.a_params = rows
    cert.witnesses = [[P(2 * i + Q(1, 2), 2 * j + Q(1, 2)) for j in range(2)] for i in range(12)]
    with pytest.raises(BudgetError):
        check_inp_certificate(cert, limits=Limits(max_subsets=10))


# ---------------------------------------------------------------- breakpoints

def test_breakpoint_profile_frozen():
    seq = [P(i, i) for i in range(6)]
    delta = [parse(t, PD.signature) for t in ("x.1 < c.1", "x.2 < c.2")]
    prof = breakpoint_profile(PD, seq, P(Q(1, 2), Q(5, 2)), delta)
    assert prof.blocks == [(0, 0), (1, 2), (3, 5)]
    assert prof.fingerprints == [(True, True), (False, True), (False, False)]
    assert prof.count == 3


def test_breakpoint_profile_empty():
    with pytest.raises(ValueError):
        breakpoint_profile(S, [], Q(0), [parse("x < c")])
