import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magbill import dynamics as dyn
from magbill.dynamics import LarmorState, center_map_M, center_map_batch, orbit
from magbill.errors import FixedBoundaryPoint, GrazingImpact, InvalidState, NotAnnular, OutsideAnnulus
from magbill.geom import Circle, Ellipse, MagneticParams, make_rng, parallel_point, sample_phase_space
from magbill.integrals import circle_integral

from oracles import alpha_printed, circle_billiard_step, circle_center_map, two_circle_intersection

CIRCLE = Circle(2.0)
ELLIPSE = Ellipse(2.0, 1.0)
P3 = MagneticParams(1 / 3)
P5 = MagneticParams(0.2)

# frozen from the closed-form two-circle oracle
EXIT_Q = np.array([-0.91666666666666663, -1.7775607503909408])
M_OF_P = np.array([-0.86979166666666685, 1.2220730206400542])


def test_frozen_values_match_oracle():
    q1, q2 = two_circle_intersection((0, 0), 2.0, (1.5, 0), 3.0)
    assert np.allclose(q2, EXIT_Q, atol=1e-14)
    assert np.allclose(circle_billiard_step((1.5, 0), 2.0, 3.0)[3], M_OF_P, atol=1e-14)
    assert q1[0] == pytest.approx(-11 / 12, abs=1e-15)


def test_reflect_examples():
    assert np.allclose(dyn.reflect([0, -1], [0, 1]), [0, 1])
    assert np.allclose(dyn.reflect([1, 0], [0, 1]), [1, 0])
    v = np.array([0.59252025, -0.80555556])
    n = np.array([-0.45833333, -0.88878038])
    assert np.allclose(dyn.reflect(v, n), [0.9999, -0.0155], atol=2e-4)
    assert np.allclose(dyn.reflect(v, n), dyn.reflect(v, -n))


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_reflect_law(a, b):
    v = np.array([math.cos(a), math.sin(a)])
    n = np.array([math.cos(b), math.sin(b)])
    w = dyn.reflect(v, n)
    tau = np.array([-n[1], n[0]])
    assert abs(w @ n + v @ n) < 1e-12
    assert abs(w @ tau - v @ tau) < 1e-12


def test_next_hit_circle_example():
    # entry point of the circle about (1.5, 0) is the other intersection
    q1, _ = two_circle_intersection((0, 0), 2.0, (1.5, 0), 3.0)
    x = q1
    v = np.array([-(x[1] - 0.0), x[0] - 1.5]) / 3.0
    state = LarmorState(x, v, P3)
    assert np.allclose(state.center(), [1.5, 0], atol=1e-14)
    t, Q, arc = dyn.next_hit(state, CIRCLE)
    assert np.allclose(Q, EXIT_Q, atol=1e-10)
    assert np.allclose(CIRCLE.eval(t), Q, atol=1e-12)
    assert 0 < arc <= 2 * math.pi
    new = dyn.billiard_step(state, CIRCLE)
    assert np.allclose(new.center(), M_OF_P, atol=1e-10)
    h = circle_integral(P3.beta)
    assert h(state.x, state.v) == pytest.approx(h(new.x, new.v), abs=1e-12)


def test_next_hit_grazing():
    state = LarmorState([2.0, 0.0], [0.0, 1.0], P3)
    with pytest.raises(GrazingImpact):
        dyn.next_hit(state, CIRCLE)


def test_next_hit_ellipse_residual():
    # at (2, 0) the inward direction is (-1, 0); tilt it inside
    for tilt in (0.3, 1.0, -0.7):
        v = np.array([-math.cos(tilt), math.sin(tilt)])
        state = LarmorState([2.0, 0.0], v, P5)
        t, Q, arc = dyn.next_hit(state, ELLIPSE)
        assert abs(np.linalg.norm(Q - state.center()) - 5.0) < 1e-10
        assert abs(Q[0] ** 2 / 4 + Q[1] ** 2 - 1) < 1e-12


def test_two_periodic_orbit():
    # alpha = pi when rho^2 = r^2 - d^2: the center is sent to its antipode and back
    P = np.array([math.sqrt(5.0), 0.0])
    MP = center_map_M(P, CIRCLE, P3)
    assert np.allclose(MP, -P, atol=1e-10)
    assert np.allclose(center_map_M(MP, CIRCLE, P3), P, atol=1e-10)


def test_center_map_example_and_fixed_points():
    P = np.array([1.5, 0.0])
    MP = center_map_M(P, CIRCLE, P3)
    assert np.allclose(MP, M_OF_P, atol=1e-10)
    assert np.linalg.norm(MP) == pytest.approx(1.5, abs=1e-12)
    for rho in (1.0, 5.0):
        Pb = rho * np.array([math.cos(0.4), math.sin(0.4)])
        with pytest.raises(FixedBoundaryPoint):
            center_map_M(Pb, CIRCLE, P3)
        assert np.allclose(center_map_M(Pb, CIRCLE, P3, identity_on_boundary=True), Pb)


def test_fixed_points_on_ellipse_parallels():
    t = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    for sign in (+1, -1):
        pts = parallel_point(ELLIPSE, t, sign, 5.0)
        res = center_map_batch(pts, ELLIPSE, P5)
        assert np.all(res.status == dyn.FIXED)


def test_batch_matches_scalar_orbit():
    P = sample_phase_space(ELLIPSE, 5.0, 40, make_rng(5))
    res = center_map_batch(P, ELLIPSE, P5)
    for p, c, st_ in zip(P, res.centers, res.status):
        if st_ == dyn.OK:
            o = orbit(p, ELLIPSE, P5, 1)
            assert np.allclose(o.center_after[0], c, atol=1e-10)


def test_orbit_records_and_geometry():
    start = sample_phase_space(ELLIPSE, 5.0, 1, make_rng(2))[0]
    o = orbit(start, ELLIPSE, P5, 200)
    assert len(o) == 200 and o.complete
    Q = o.impact
    assert np.max(np.abs(np.linalg.norm(o.center_before - Q, axis=1) - 5.0)) < 1e-9
    assert np.max(np.abs(np.linalg.norm(o.center_after - Q, axis=1) - 5.0)) < 1e-9
    n = np.stack([Q[:, 0] / 4, Q[:, 1]], axis=1)
    n /= np.linalg.norm(n, axis=1)[:, None]
    tau = np.stack([-n[:, 1], n[:, 0]], axis=1)
    vin, vout = o.v_in, o.v_out
    assert np.max(np.abs(np.sum(vout * n, 1) + np.sum(vin * n, 1))) < 1e-12
    assert np.max(np.abs(np.sum(vout * tau, 1) - np.sum(vin * tau, 1))) < 1e-12
    rec = o[3]
    assert rec.step == 3 and np.allclose(rec.center_after, o[4].center_before)
    assert len(orbit(start, ELLIPSE, P5, 0)) == 0


def test_orbit_on_ellipse_stays_on_ellipse():
    o = orbit(np.array([4.0, 0.5]), ELLIPSE, P5, 10_000)
    assert o.complete
    Q = o.impact
    assert np.max(np.abs(Q[:, 0] ** 2 / 4 + Q[:, 1] ** 2 - 1)) < 1e-10


def test_orbit_truncates_with_flag():
    o = orbit(np.array([1.0, 0.0]), CIRCLE, P3, 10)
    assert len(o) == 1 and not o.complete
    assert o.status[-1] == dyn.FIXED
    assert isinstance(o.error, FixedBoundaryPoint)
    with pytest.raises(InvalidState):
        orbit(LarmorState([3.0, 0.0], [0.0, 1.0], P3), CIRCLE, P3, 5)


def test_orbit_integral_column():
    st0 = LarmorState.from_angle(2.0, 0.0, 1.83, P3)
    h = circle_integral(P3.beta)
    o = orbit(st0, CIRCLE, P3, 500, integral=h)
    assert np.max(np.abs(o.integral_value - h(st0.x, st0.v))) < 1e-10


def test_rotation_angle_examples():
    assert dyn.rotation_angle_circle(2, 3, 1.5) == pytest.approx(4.0938, abs=1e-4)
    assert dyn.rotation_angle_circle(2, 3, 1.5) == pytest.approx(alpha_printed(2, 3, 1.5), abs=1e-12)
    assert dyn.rotation_angle_circle(2, 3, 5.0) == 0.0
    assert dyn.rotation_angle_circle(2, 3, 1.0) == 2 * math.pi
    with pytest.raises(OutsideAnnulus):
        dyn.rotation_angle_circle(2, 3, 0.5)
    with pytest.raises(OutsideAnnulus):
        dyn.rotation_angle_circle(2, 1, 1.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0001, 4.9999), st.floats(-math.pi, math.pi))
def test_rotation_law_circle(rho, phi):
    P = rho * np.array([math.cos(phi), math.sin(phi)])
    MP = center_map_M(P, CIRCLE, P3)
    assert abs(np.linalg.norm(MP) - rho) < 1e-10
    dphi = math.atan2(MP[1], MP[0]) - phi
    alpha = dyn.rotation_angle_circle(2.0, 3.0, rho)
    assert abs(np.exp(1j * dphi) - np.exp(-1j * alpha)) < 1e-9
    assert np.allclose(MP, circle_center_map(P, 2.0, 3.0), atol=1e-9)


def test_rotation_number_examples():
    o = orbit(np.array([1.5, 0.0]), CIRCLE, P3, 400)
    nu = dyn.rotation_number_estimate(np.vstack([o.center_before[:1], o.center_after]))
    expected = (2 * math.pi - alpha_printed(2, 3, 1.5)) / (2 * math.pi)
    assert nu == pytest.approx(expected, abs=1e-9)
    assert nu == pytest.approx(0.3485, abs=1e-4)
    # limits at the two boundary curves (see the notes on orientation)
    near_outer = orbit(np.array([5.0 - 1e-4, 0.0]), CIRCLE, P3, 50).centers
    near_inner = orbit(np.array([1.0 + 1e-4, 0.0]), CIRCLE, P3, 50).centers
    assert dyn.rotation_number_estimate(near_outer) > 0.99
    assert dyn.rotation_number_estimate(near_inner) < 0.01
    assert dyn.rotation_number_estimate(np.tile([1.5, 0.0], (10, 1))) == 0.0
    with pytest.raises(NotAnnular):
        dyn.rotation_number_estimate(np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]))


@pytest.mark.parametrize("boundary,params", [(CIRCLE, P3), (ELLIPSE, P5)], ids=["circle", "ellipse"])
def test_jacobian_determinant(boundary, params):
    P = sample_phase_space(boundary, params.r, 100, make_rng(11))
    det = dyn.map_jacobian_det(P, boundary, params)
    ok = np.isfinite(det)
    assert ok.sum() >= 95
    assert np.max(np.abs(det[ok] - 1.0)) < 1e-6


def test_lyapunov_circle_and_decrease():
    short = dyn.lyapunov_estimate([1.5, 0.3], CIRCLE, P3, 1000)
    long = dyn.lyapunov_estimate([1.5, 0.3], CIRCLE, P3, 10_000)
    assert abs(long.exponent) < 1e-3 and long.complete
    assert abs(long.exponent) < abs(short.exponent)
    assert long.stderr >= 0


def test_lyapunov_ellipse_positive_somewhere():
    starts = sample_phase_space(ELLIPSE, 5.0, 10, make_rng(0))
    est = dyn.lyapunov_scan(starts, ELLIPSE, P5, 3000)
    assert max(e.exponent for e in est) > 0.01


def test_phase_portrait_circle_and_ellipse():
    pc = dyn.phase_portrait(CIRCLE, P3, 6, 200, seed=4)
    for k in range(6):
        pts = pc.orbit_points(k)
        assert len(pts) == 200
        assert dyn.radial_scatter(pts) < 1e-9
    pe = dyn.phase_portrait(ELLIPSE, P5, 6, 400, seed=4)
    grid = [(x, y) for x in np.linspace(-1.5, 1.5, 7) for y in np.linspace(-0.5, 0.5, 5)]
    for c in grid:
        assert max(dyn.radial_scatter(pe.orbit_points(k), c) for k in range(6)) > 1e-3
    assert len(dyn.phase_portrait(ELLIPSE, P5, 0, 10)) == 0


def test_phase_portrait_reproducible(tmp_path):
    a = dyn.phase_portrait(ELLIPSE, P5, 3, 50, seed=9)
    b = dyn.phase_portrait(ELLIPSE, P5, 3, 50, seed=9)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    dyn.write_portrait_csv(a, pa)
    dyn.write_portrait_csv(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert pa.read_text().splitlines()[0] == ",".join(dyn.PORTRAIT_COLUMNS)
    svg = tmp_path / "p.svg"
    dyn.write_portrait_svg(a, svg, ELLIPSE, 5.0)
    text = svg.read_text()
    assert text.startswith("<svg") and "<script" not in text and text.count("<g ") == 3


def test_orbit_csv(tmp_path):
    o = orbit(np.array([1.5, 0.0]), CIRCLE, P3, 5, integral=circle_integral(P3.beta))
    path = tmp_path / "o.csv"
    dyn.write_orbit_csv(o, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(dyn.ORBIT_COLUMNS)
    assert len(lines) == 6
    assert float(lines[1].split(",")[8]) == pytest.approx(M_OF_P[0], abs=1e-12)
