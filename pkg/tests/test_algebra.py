import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magbill.algebra import (
    CERTIFY_TOL,
    certify_singular,
    closed_form_singular_points,
    ellipse_offset_poly,
    ellipse_offset_singular_points,
    implicit_curvature,
    infinity_report,
    obstruction_report,
    offset_vanishing_check,
    r_scan,
    residual_scale,
    scan_to_dict,
    singular_search,
)
from magbill.errors import CertificationFailed, NotOnCurve, OutsideRegime, VanishingGradient
from magbill.geom import Circle, Ellipse, make_rng, parallel_curvature, parallel_point
from magbill.poly import BivarPoly

X, Y = BivarPoly.x(), BivarPoly.y()
ELLIPSE = X**2 / 4 + Y**2 - 1
# every (a, b, r) used in this suite
OFFSET_PARAMS = [(2, 1, 5), (3, 1, 10), (2, 1, 8), (3, 2, 7), (2, 1, 4.1), (2, 1, 4.5), (2, 1, 6), (3, 2, 4.6), (3, 2, 5)]


def scaled(f, p):
    p = np.asarray(p, dtype=complex)
    return abs(f(p[0], p[1])) / float(residual_scale(f, p))


def matches(points, target, tol=1e-6):
    return any(np.linalg.norm(np.asarray(p) - np.asarray(target)) < tol for p in points)


def test_offset_poly_vertex_examples():
    f = ellipse_offset_poly(2.0, 1.0, 5.0)
    assert f.degree == 8
    assert scaled(f, [-3.0, 0.0]) < 1e-6
    assert scaled(f, [7.0, 0.0]) < 1e-6


def test_offset_poly_circle_case():
    f = ellipse_offset_poly(1.5, 1.5, 4.0)
    for rho in (2.5, 5.5):
        pts = Circle(rho).eval(np.linspace(0, 2 * math.pi, 200))
        assert max(scaled(f, p) for p in pts) < 1e-6


@pytest.mark.parametrize("a,b,r", OFFSET_PARAMS)
def test_transcription_gate(a, b, r):
    assert offset_vanishing_check(a, b, r) < 1e-6


def test_vanishing_check_examples():
    assert offset_vanishing_check(2, 1, 5, 4096) < 1e-6
    assert offset_vanishing_check(3, 1, 10, 4096) < 1e-6
    assert offset_vanishing_check(1, 1, 2, 4096) < 1e-10


def test_singular_points_examples():
    pts = ellipse_offset_singular_points(2.0, 1.0, 5.0)
    assert matches(pts, [0, math.sqrt(63) / 2]) and matches(pts, [0, -math.sqrt(63) / 2])
    assert matches(pts, [8.48528137423857j, 0]) and matches(pts, [-8.48528137423857j, 0])
    assert abs(math.sqrt(63) / 2 - 3.96863) < 1e-5
    pts = ellipse_offset_singular_points(2.0, 1.0, 8.0)
    assert matches(pts, [0, 6.708203932499369]) and matches(pts, [0, -6.708203932499369])
    assert matches(pts, [13.74772708486752j, 0]) and matches(pts, [-13.74772708486752j, 0])
    with pytest.raises(CertificationFailed, match="circle has smooth offsets"):
        ellipse_offset_singular_points(1.0, 1.0, 3.0)
    with pytest.raises(OutsideRegime):
        ellipse_offset_singular_points(2.0, 1.0, 3.0)


@pytest.mark.parametrize("a,b,r", OFFSET_PARAMS)
def test_closed_form_points_certified(a, b, r):
    f = ellipse_offset_poly(a, b, r)
    assert np.all(certify_singular(f, closed_form_singular_points(a, b, r)) < CERTIFY_TOL)


def test_singular_search_examples():
    f = ellipse_offset_poly(2.0, 1.0, 5.0)
    found = singular_search(f, n_starts=2000, seed=0)
    for p in closed_form_singular_points(2.0, 1.0, 5.0):
        assert matches(found, p)
    assert np.all(certify_singular(f, found) < 1e-8)
    assert singular_search(X**2 + Y**2 - 1, n_starts=200) == []
    cusp = singular_search(X**2 - Y**3, n_starts=200)
    assert len(cusp) == 1 and matches(cusp, [0, 0])


def test_implicit_curvature_examples():
    assert abs(implicit_curvature(ELLIPSE, [2.0, 0.0])) == pytest.approx(2.0, abs=1e-12)
    rho = 3.0
    assert abs(implicit_curvature(X**2 + Y**2 - rho**2, [rho, 0.0])) == pytest.approx(1 / rho, abs=1e-12)
    assert abs(implicit_curvature(Y - X**2, [0.0, 0.0])) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(NotOnCurve):
        implicit_curvature(ELLIPSE, [1.0, 1.0])
    with pytest.raises(VanishingGradient):
        implicit_curvature(X**2 - Y**3, [0.0, 0.0])


def test_implicit_curvature_matches_parametric():
    e = Ellipse(2.0, 1.0)
    t = np.linspace(0, 2 * math.pi, 100, endpoint=False)
    for s, p, k in zip(t, e.eval(t), e.curvature(t)):
        assert abs(implicit_curvature(ELLIPSE, p)) == pytest.approx(k, rel=1e-8)


def test_offset_curvature_matches_parallel_formula():
    e = Ellipse(2.0, 1.0)
    f = ellipse_offset_poly(2.0, 1.0, 5.0)
    t = np.linspace(0.05, 2 * math.pi, 20, endpoint=False)
    for sign in (+1, -1):
        for s in t:
            p = parallel_point(e, s, sign, 5.0)
            k = parallel_curvature(e.curvature(s), 5.0, sign)
            assert abs(implicit_curvature(f, p)) == pytest.approx(abs(k), rel=1e-6)


def test_infinity_report_examples():
    pts = infinity_report(ELLIPSE)
    assert len(pts) == 2
    assert sorted((p.ratio.imag for p in pts)) == pytest.approx([-2.0, 2.0], abs=1e-12)
    assert all(p.multiplicity == 1 and not p.isotropic and not p.tangency and p.obstruction for p in pts)
    pts = infinity_report(X**2 + Y**2 - 4)
    assert all(p.isotropic and not p.obstruction for p in pts)
    pts = infinity_report(Y - X**2)
    assert len(pts) == 1
    (p,) = pts
    assert p.ratio == 0 and p.multiplicity == 2 and p.tangency and not p.obstruction
    # (1:0:0) appears as the infinite ratio
    pts = infinity_report(X - Y**2)
    assert math.isinf(pts[0].ratio.real) and pts[0].tangency
    assert pts[0].to_dict()["ratio"] is None


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4))
def test_isotropic_only_for_circular_leading_forms(seed, m):
    rng = make_rng(seed)
    d = 2 * m
    lower = BivarPoly.from_terms([(i, k - i, rng.normal()) for k in range(d) for i in range(k + 1)])
    f = (X**2 + Y**2) ** m - lower
    pts = infinity_report(f)
    assert pts and all(p.isotropic for p in pts)
    assert sum(p.multiplicity for p in pts) == d


def test_offset_infinity_points_are_not_obstructions():
    pts = infinity_report(ellipse_offset_poly(2.0, 1.0, 5.0))
    assert sum(p.multiplicity for p in pts) == 8
    assert not any(p.obstruction for p in pts)


def test_obstruction_report_examples():
    f = ellipse_offset_poly(2.0, 1.0, 5.0)
    rep = obstruction_report(f, n_starts=500, closed_form=closed_form_singular_points(2.0, 1.0, 5.0))
    assert rep.verdict == "obstructed_affine_singularity"
    for p in closed_form_singular_points(2.0, 1.0, 5.0):
        assert matches(rep.affine_singular_points, p)
    assert obstruction_report(X**2 + Y**2 - 9, n_starts=200).verdict == "no_obstruction"
    rep = obstruction_report(ELLIPSE, n_starts=200)
    assert rep.verdict == "obstructed_transversal_infinity"
    assert rep.affine_singular_points == []


def test_obstruction_report_json_schema():
    f = ellipse_offset_poly(2.0, 1.0, 5.0)
    d = json.loads(obstruction_report(f, n_starts=100, closed_form=closed_form_singular_points(2.0, 1.0, 5.0)).to_json())
    assert set(d) == {"verdict", "affine_singular", "infinity"}
    assert all(len(p) == 4 for p in d["affine_singular"])
    assert all(set(p) == {"ratio", "multiplicity", "isotropic", "tangency"} for p in d["infinity"])


@pytest.mark.parametrize("a,b,r", [(2, 1, 4.5), (3, 2, 5), (3, 1, 10)])
def test_offset_always_obstructed(a, b, r):
    f = ellipse_offset_poly(a, b, r)
    rep = obstruction_report(f, n_starts=100, closed_form=closed_form_singular_points(a, b, r))
    assert rep.verdict != "no_obstruction"


def test_r_scan_examples():
    entries = r_scan(2.0, 1.0, [4.1, 4.5, 5.0, 6.0, 8.0])
    assert all(e.in_regime and e.certified for e in entries)
    entries = r_scan(3.0, 2.0, [4.6, 5.0, 7.0])
    assert all(e.in_regime and e.certified for e in entries)
    assert r_scan(2.0, 1.0, []) == []
    out = r_scan(2.0, 1.0, [3.0])
    assert not out[0].in_regime and not out[0].certified
    d = scan_to_dict(entries)
    assert [e["r"] for e in d] == [4.6, 5.0, 7.0]
    json.dumps(d)
