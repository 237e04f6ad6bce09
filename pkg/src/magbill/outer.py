"""Outer magnetic billiard on the annulus between a curve and its parallel at 2r.

For a point ``P`` of the annulus take the (counterclockwise) Larmor circle
through ``P`` that touches the curve ``Gamma`` at ``Gamma(s)`` with the agreed
orientation. ``T(P)`` is the point of that circle such that ``Gamma(s)`` is the
midpoint of the arc from ``P`` to ``T(P)``.

The centers ``O(s)`` of all such tangent circles form the parallel curve of
``Gamma`` at distance ``r`` on the side ``sigma`` (+1 for a counterclockwise
curve, -1 for a clockwise one), which is how membership in the annulus is
decided.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _numerics
from .dynamics import center_map_batch, jacobian_det
from .errors import InadmissibleField, NoTangency, OnBoundary
from .geom import (
    ADMISSIBILITY_MARGIN,
    TWO_PI,
    Boundary,
    MagneticParams,
    ParallelCurve,
    cross,
    dot,
    make_rng,
    min_curvature,
    norm,
    rotate90,
    sample_phase_space,
)

OK, ON_BOUNDARY, NO_TANGENCY = 0, 1, 2
BOUNDARY_TOL = 1e-9
# arcs this close to 0 or pi trigger the (slower) exact boundary test
SUSPICIOUS_ARC = 1e-3
ARC_SLACK = 1e-9


@dataclass(frozen=True)
class OuterConfig:
    """Curve ``gamma``, its orientation ('ccw' or 'cw') and the Larmor radius."""

    gamma: Boundary
    orientation: str = "ccw"
    r: float = 1.0

    def __post_init__(self):
        key = str(self.orientation).lower()
        aliases = {"ccw": "ccw", "counterclockwise": "ccw", "cw": "cw", "clockwise": "cw"}
        if key not in aliases:
            raise ValueError(f"orientation must be 'cw' or 'ccw', got {self.orientation!r}")
        object.__setattr__(self, "orientation", aliases[key])
        if not self.r > 0:
            raise ValueError(f"radius must be positive, got {self.r}")
        if aliases[key] == "ccw":
            kmin = min_curvature(self.gamma)
            if not 1.0 / self.r < kmin - ADMISSIBILITY_MARGIN:
                raise InadmissibleField(
                    f"counterclockwise outer billiard needs 1/r < min curvature {kmin:.12g}, got r={self.r}"
                )

    @property
    def sigma(self):
        return 1 if self.orientation == "ccw" else -1

    def center_curve(self):
        """Curve traced by the centers of the tangent Larmor circles."""
        return ParallelCurve(self.gamma, self.r, self.sigma)

    def outer_curve(self):
        """The far boundary component of the annulus (parallel at distance 2r)."""
        return ParallelCurve(self.gamma, 2.0 * self.r, self.sigma)

    def edge_gap(self, points):
        """Signed-free gap of points to the annulus boundary and an inside flag."""
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        dmin, dmax = self.center_curve().distance_extremes(P)
        if self.orientation == "ccw":
            gap = np.minimum(np.abs(dmin - self.r), np.abs(dmax - self.r))
            inside = (dmin < self.r) & (dmax > self.r)
        else:
            # outside gamma and within reach of a tangent circle
            dgam, _ = self.gamma.distance_extremes(P)
            outside_gamma = self.gamma.radial_offset(P) > 0
            gap = np.minimum(np.abs(dmin - self.r), dgam)
            inside = (dmin < self.r) & outside_gamma
        return gap, inside


def tangent_center(gamma, s, orientation, r):
    """Center of the Larmor circle tangent to ``gamma`` at ``gamma(s)`` with matching orientation."""
    sigma = 1 if str(orientation).lower() in ("ccw", "counterclockwise") else -1
    return gamma.eval(s) + sigma * r * rotate90(gamma.tangent(s))


class OuterResult(NamedTuple):
    images: np.ndarray
    s: np.ndarray
    centers: np.ndarray
    status: np.ndarray


def outer_map_batch(points, config):
    """Apply ``T`` to many points; failed rows keep their input and get a status."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(P)
    r = config.r
    gamma = config.gamma
    ocurve = config.center_curve()

    def f(s, i):
        o = ocurve.eval(s)
        return (P[i, 0] - o[..., 0]) ** 2 + (P[i, 1] - o[..., 1]) ** 2 - r * r

    rows, roots, _ = _numerics.periodic_roots(f, n, gamma.period)
    O = ocurve.eval(roots)
    G = gamma.eval(roots)
    a = P[rows] - O
    b = G - O
    arc = np.mod(np.arctan2(cross(a, b), dot(a, b)), TWO_PI)
    usable = arc <= math.pi + ARC_SLACK
    key = np.where(usable, arc, np.inf)
    best = np.full(n, np.inf)
    np.minimum.at(best, rows, key)
    pick = np.full(n, -1)
    chosen = usable & (key == best[rows])
    pick[rows[chosen]] = np.nonzero(chosen)[0]

    status = np.zeros(n, dtype=int)
    found = pick >= 0
    s = np.full(n, np.nan)
    s[found] = roots[pick[found]]
    best_arc = np.where(found, best, np.nan)
    suspicious = ~found | (best_arc < SUSPICIOUS_ARC) | (best_arc > math.pi - SUSPICIOUS_ARC)
    if suspicious.any():
        gap, inside = config.edge_gap(P[suspicious])
        sub = np.zeros(suspicious.sum(), dtype=int)
        sub[~inside] = NO_TANGENCY
        sub[gap < BOUNDARY_TOL] = ON_BOUNDARY
        sub[(sub == OK) & ~found[suspicious]] = NO_TANGENCY
        status[suspicious] = sub

    ok = status == OK
    s_ok = np.where(ok, s, 0.0)
    Oc = ocurve.eval(s_ok)
    u = (gamma.eval(s_ok) - Oc) / r
    w = P - Oc
    images = Oc + 2.0 * dot(w, u)[:, None] * u - w
    images = np.where(ok[:, None], images, P)
    return OuterResult(images, np.where(ok, s, np.nan), np.where(ok[:, None], Oc, np.nan), status)


def outer_step(P, config):
    """One application of ``T``; raises OnBoundary or NoTangency."""
    res = outer_map_batch(P, config)
    st = int(res.status[0])
    point = np.asarray(P, dtype=float).reshape(2)
    if st == ON_BOUNDARY:
        raise OnBoundary(f"point ({point[0]:.17g}, {point[1]:.17g}) lies on the annulus boundary", point)
    if st == NO_TANGENCY:
        raise NoTangency(f"no admissible tangent Larmor circle through ({point[0]:.17g}, {point[1]:.17g})")
    return res.images[0]


def outer_map(P, config, identity_on_boundary=False):
    """``T(P)``; with ``identity_on_boundary`` points of the annulus boundary are returned unchanged."""
    try:
        return outer_step(P, config)
    except OnBoundary:
        if identity_on_boundary:
            return np.asarray(P, dtype=float).reshape(2)
        raise


class OuterOrbit(NamedTuple):
    points: np.ndarray
    s_tangency: np.ndarray
    centers: np.ndarray
    error: Exception


def outer_orbit(P, config, n_steps):
    """Iterate ``T``. Row k holds the point before step k and the tangency used."""
    pts, ss, cs = [], [], []
    cur = np.asarray(P, dtype=float).reshape(2)
    error = None
    for _ in range(int(n_steps)):
        res = outer_map_batch(cur, config)
        if res.status[0] != OK:
            try:
                outer_step(cur, config)
            except (OnBoundary, NoTangency) as exc:
                error = exc
            break
        pts.append(cur)
        ss.append(res.s[0])
        cs.append(res.centers[0])
        cur = res.images[0]
    return OuterOrbit(
        np.array(pts).reshape(-1, 2), np.array(ss, dtype=float), np.array(cs).reshape(-1, 2), error
    )


def sample_annulus(config, n, rng, margin=1e-3):
    """``n`` uniform random points of the annulus at least ``margin`` from its boundary."""
    lo, hi = config.gamma.bounding_box()
    lo = lo - 2.0 * config.r
    hi = hi + 2.0 * config.r
    out = []
    count = 0
    while count < n:
        cand = rng.uniform(lo, hi, size=(max(2 * (n - count), 16), 2))
        gap, inside = config.edge_gap(cand)
        ok = inside & (gap > margin)
        out.append(cand[ok])
        count += int(ok.sum())
    return np.concatenate(out)[:n] if out else np.empty((0, 2))


def outer_jacobian_det(points, config, h=3e-5):
    """Finite-difference Jacobian determinant of ``T`` (step shrunk near the annulus edge)."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    gap, _ = config.edge_gap(P)
    step = np.minimum(h, gap / 200.0)

    def fn(pts):
        res = outer_map_batch(pts, config)
        return np.where((res.status == OK)[:, None], res.images, np.nan)

    return jacobian_det(fn, P, step)


def arc_angles(P, config):
    """Angles at ``O`` from ``P`` to the tangency and from the tangency to ``T(P)``."""
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    res = outer_map_batch(P, config)
    G = config.gamma.eval(np.where(res.status == OK, res.s, 0.0))
    O = res.centers

    def ccw(a, b):
        return np.mod(np.arctan2(cross(a, b), dot(a, b)), TWO_PI)

    return ccw(P - O, G - O), ccw(G - O, res.images - O), res


def equivalence_check(boundary, params, n_samples, seed=0, margin=1e-3):
    """Max ``|T(P) - M(P)|`` for T built on the inner parallel curve (counterclockwise).

    Centers where either map reports a degenerate configuration are replaced by
    fresh samples.
    """
    if n_samples <= 0:
        return 0.0
    r = params.r if isinstance(params, MagneticParams) else float(params)
    config = OuterConfig(ParallelCurve(boundary, r, +1), "ccw", r)
    rng = make_rng(seed)
    worst = 0.0
    remaining = int(n_samples)
    for _ in range(100):
        if remaining == 0:
            break
        P = sample_phase_space(boundary, r, remaining, rng, margin=margin)
        m = center_map_batch(P, boundary, r)
        t = outer_map_batch(P, config)
        good = (m.status == 0) & (t.status == OK)
        if good.any():
            worst = max(worst, float(np.max(norm(t.images[good] - m.centers[good]))))
        remaining -= int(good.sum())
    return worst
