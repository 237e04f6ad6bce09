import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magbill.errors import BoundarySpecError, CuspSingularity, InadmissibleField, InvalidVelocity, OffCircle
from magbill.geom import (
    Circle,
    Ellipse,
    FourierBoundary,
    MagneticParams,
    ParallelCurve,
    larmor_center,
    make_rng,
    min_curvature,
    normalize,
    parallel_curvature,
    parallel_point,
    parse_boundary,
    rotate90,
    sample_phase_space,
    velocity_from_center,
)

from oracles import ellipse_curvature, ellipse_offset_point

finite = st.floats(-1e3, 1e3, allow_nan=False)
BOUNDARIES = [Circle(2.0), Ellipse(2.0, 1.0), FourierBoundary(2.0, [(3, 0.05, 0.3)]), Circle(1.5, (0.4, -0.2))]


def test_rotate90_examples():
    assert np.array_equal(rotate90([1.0, 0.0]), [0.0, 1.0])
    assert np.array_equal(rotate90([0.0, 1.0]), [-1.0, 0.0])
    assert np.array_equal(rotate90(rotate90([3.0, 4.0])), [-3.0, -4.0])


@given(finite, finite)
def test_rotate90_twice_negates(x, y):
    assert np.array_equal(rotate90(rotate90([x, y])), [-x, -y])


@given(finite, finite)
def test_normalize_is_unit(x, y):
    if math.hypot(x, y) < 1e-9:
        return
    assert abs(np.linalg.norm(normalize([x, y])) - 1.0) < 1e-14


def test_larmor_center_examples():
    assert np.allclose(larmor_center([0, 0], [1, 0], 1.0), [0, 1])
    assert np.allclose(larmor_center([2, 3], [0, 1], 2.0), [0, 3])
    with pytest.raises(InvalidVelocity):
        larmor_center([0, 0], [1.0, 1e-4], 1.0)


def test_velocity_from_center_examples():
    assert np.allclose(velocity_from_center([0, 1], [0, 0], 1.0), [1, 0])
    assert np.allclose(velocity_from_center([0, 3], [2, 3], 2.0), [0, 1])
    assert np.allclose(velocity_from_center([0, 0], [2.5, 0], 2.5), [0, 1])
    with pytest.raises(OffCircle):
        velocity_from_center([0, 0], [1.1, 0], 1.0)


def test_larmor_round_trip():
    rng = make_rng(1)
    for _ in range(100):
        x = rng.uniform(-5, 5, 2)
        th = rng.uniform(0, 2 * math.pi)
        v = np.array([math.cos(th), math.sin(th)])
        r = rng.uniform(0.1, 10)
        assert np.allclose(velocity_from_center(larmor_center(x, v, r), x, r), v, atol=1e-12)


def test_parallel_point_examples():
    c = Circle(2.0)
    assert np.allclose(parallel_point(c, 0.0, "+", 3.0), [-1, 0], atol=1e-15)
    assert np.allclose(parallel_point(c, 0.0, "-", 3.0), [5, 0], atol=1e-15)
    assert np.allclose(parallel_point(Ellipse(2, 1), 0.0, "+", 5.0), [-3, 0], atol=1e-15)


def test_parallel_point_matches_implicit_normal_oracle():
    e = Ellipse(2.0, 1.0)
    for t in np.linspace(0, 2 * math.pi, 37):
        assert np.allclose(parallel_point(e, t, +1, 5.0), ellipse_offset_point(2, 1, t, 5.0, True), atol=1e-12)
        assert np.allclose(parallel_point(e, t, -1, 5.0), ellipse_offset_point(2, 1, t, 5.0, False), atol=1e-12)


def test_parallel_curvature_examples():
    assert parallel_curvature(0.5, 3.0, "+") == pytest.approx(1.0, abs=1e-15)
    assert parallel_curvature(0.5, 3.0, "-") == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(CuspSingularity):
        parallel_curvature(0.5, 2.0, "+")


def test_parallel_curvature_bounds():
    beta = 1 / 3
    for k in np.linspace(0.34, 5, 30):
        assert parallel_curvature(k, 3.0, +1) > beta
        assert 0 < parallel_curvature(k, 3.0, -1) < beta


def test_min_curvature_examples():
    assert min_curvature(Circle(2.0)) == pytest.approx(0.5, rel=1e-12)
    assert min_curvature(Ellipse(2.0, 1.0)) == pytest.approx(0.25, rel=1e-10)
    assert min_curvature(Ellipse(1.0, 1.0)) == pytest.approx(1.0, rel=1e-10)


def test_magnetic_params():
    p = MagneticParams(1 / 3)
    assert p.r * p.beta == pytest.approx(1.0, abs=1e-15)
    assert MagneticParams.from_radius(5.0).beta == 0.2
    assert p.admissible(Circle(2.0))
    assert not MagneticParams(0.5).admissible(Circle(2.0))
    with pytest.raises(InadmissibleField):
        MagneticParams(0.6).require_admissible(Circle(2.0))
    with pytest.raises(ValueError):
        MagneticParams(0.0)


@pytest.mark.parametrize("boundary", BOUNDARIES, ids=repr)
def test_boundary_invariants(boundary):
    t = np.linspace(0, boundary.period, 257)
    assert np.all(boundary.curvature(t) > 0)
    assert np.max(np.abs(boundary.eval(t) - boundary.eval(t + boundary.period))) < 1e-12
    h = 1e-6
    fd = (boundary.eval(t + h) - boundary.eval(t - h)) / (2 * h)
    fd /= np.linalg.norm(fd, axis=1)[:, None]
    assert np.max(np.abs(fd - boundary.tangent(t))) < 1e-6
    # counterclockwise: the normal J tau points inside
    inner = boundary.eval(t) + 1e-3 * rotate90(boundary.tangent(t))
    assert np.all(boundary.inside(inner))
    assert boundary.inside(boundary.reference_point)


def test_ellipse_curvature_matches_formula():
    e = Ellipse(2.0, 1.0)
    t = np.linspace(0, 2 * math.pi, 50)
    assert np.allclose(e.curvature(t), [ellipse_curvature(2, 1, s) for s in t], rtol=1e-10)


@pytest.mark.parametrize("boundary", BOUNDARIES[:3], ids=repr)
@pytest.mark.parametrize("sign", [+1, -1])
def test_parallel_distance_and_curvature(boundary, sign):
    # r k >= 1/2 keeps the inner parallel curve away from the cusp regime
    r = 0.5 / min_curvature(boundary)
    t = np.linspace(0, boundary.period, 101)
    p = parallel_point(boundary, t, sign, r)
    assert np.max(np.abs(np.linalg.norm(p - boundary.eval(t), axis=1) - r)) < 1e-12
    # curvature of the sampled curve from finite differences
    h = 1e-4
    pc = ParallelCurve(boundary, r, sign)
    d1 = (pc.eval(t + h) - pc.eval(t - h)) / (2 * h)
    d2 = (pc.eval(t + h) - 2 * pc.eval(t) + pc.eval(t - h)) / h**2
    k_fd = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.linalg.norm(d1, axis=1) ** 3
    k = parallel_curvature(boundary.curvature(t), r, sign)
    assert np.max(np.abs(np.abs(k_fd) - np.abs(k)) / np.abs(k)) < 1e-5


def test_circle_parallels_are_circles():
    c = Circle(2.0)
    t = np.linspace(0, 2 * math.pi, 1024, endpoint=False)
    assert np.max(np.abs(np.linalg.norm(parallel_point(c, t, +1, 3.0), axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(parallel_point(c, t, -1, 3.0), axis=1) - 5.0)) < 1e-12


@pytest.mark.parametrize("boundary", [Circle(2.0), Ellipse(2.0, 1.0)], ids=repr)
def test_tangent_circles_stay_in_annulus(boundary):
    # circles of radius r centred on gamma stay between gamma_{+r} and gamma_{-r}
    r = 0.9 / min_curvature(boundary)
    inner, outer = ParallelCurve(boundary, r, +1), ParallelCurve(boundary, r, -1)
    th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    for s in np.linspace(0, boundary.period, 24, endpoint=False):
        pts = boundary.eval(s) + r * np.stack([np.cos(th), np.sin(th)], axis=1)
        # outside the inner parallel curve, inside the outer one (radial offsets in star coordinates)
        assert np.all(inner.radial_offset(pts) >= -1e-9)
        assert np.all(outer.radial_offset(pts) <= 1e-9)


def test_hits_agree_between_scan_and_closed_form():
    e = Ellipse(2.0, 1.0)
    generic = Ellipse(2.0, 1.0, analytic=False)
    rng = make_rng(3)
    P = sample_phase_space(e, 5.0, 50, rng)
    a = e.hits(P, 5.0)
    b = generic.hits(P, 5.0)
    assert np.array_equal(a[2], b[2])
    diff = np.angle(np.exp(1j * (a[1] - b[1])))
    assert np.max(np.abs(diff[a[2]])) < 1e-9


def test_parse_boundary():
    assert isinstance(parse_boundary("circle:d=2"), Circle)
    c = parse_boundary("circle:d=2,cx=1,cy=-1")
    assert np.allclose(c.reference_point, [1, -1])
    e = parse_boundary("ellipse:a=2,b=1")
    assert (e.a, e.b) == (2.0, 1.0)
    f = parse_boundary("fourier:base=2,terms=3:0.05:0.3;2:0.01:0")
    assert isinstance(f, FourierBoundary)
    for bad in ["square:d=1", "circle:r=2", "ellipse:a=2", "circle:d=x", "fourier:base=1,terms=2:0.5:0"]:
        with pytest.raises((BoundarySpecError, ValueError)):
            parse_boundary(bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_phase_space_samples_reach_boundary(seed):
    e = Ellipse(2.0, 1.0)
    P = sample_phase_space(e, 5.0, 20, make_rng(seed))
    dmin, dmax = e.distance_extremes(P)
    assert np.all(dmin < 5.0) and np.all(dmax > 5.0)
