"""Magnetic billiard dynamics: Larmor flights, reflections and the center map M.

The particle moves counterclockwise on Larmor circles of radius ``r = 1/beta``.
Between two impacts the whole motion is encoded by the center of its circle, so
the billiard map becomes a map ``M`` on centers. ``M(P)`` is the mirror image
of ``P`` in the normal line of the boundary at the exit point of ``circle(P, r)``.

Sequential orbits use scalar fast paths of the boundary (plain floats, no numpy
per step); maps over many centers at once go through :func:`center_map_batch`.
"""

import contextlib
import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    FixedBoundaryPoint,
    GrazingImpact,
    InvalidState,
    InvalidVelocity,
    MagBillError,
    NoImpact,
    NotAnnular,
    OutsideAnnulus,
)
from .geom import (
    TWO_PI,
    MagneticParams,
    dot,
    larmor_center,
    make_rng,
    norm,
    rotate90,
    sample_phase_space,
    velocity_from_center,
)

GRAZING_TOL = 1e-9
FIXED_TOL = 1e-9
# transversality below which a center is re-examined for grazing / fixed points
SUSPICIOUS = 1e-3

OK, FIXED, GRAZING, NO_IMPACT = 0, 1, 2, 3
STATUS_NAMES = {OK: "ok", FIXED: "fixed boundary point", GRAZING: "grazing impact", NO_IMPACT: "no impact"}


@dataclass(frozen=True)
class LarmorState:
    """Position and unit velocity of the particle for a given field."""

    x: np.ndarray
    v: np.ndarray
    params: MagneticParams

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(2)
        v = np.asarray(self.v, dtype=float).reshape(2)
        speed = math.hypot(v[0], v[1])
        if abs(speed - 1.0) > 1e-9:
            raise InvalidVelocity(f"velocity must be a unit vector, got |v|={speed}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v / speed)

    @classmethod
    def from_angle(cls, x, y, theta, params):
        return cls(np.array([x, y]), np.array([math.cos(theta), math.sin(theta)]), params)

    @property
    def r(self):
        return self.params.r

    def center(self):
        return larmor_center(self.x, self.v, self.params.r)


class OrbitRecord(NamedTuple):
    step: int
    t_impact: float
    impact: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    center_before: np.ndarray
    center_after: np.ndarray
    arc_angle: float
    integral_value: Optional[float]
    status: int


@dataclass
class Orbit:
    """Column storage for a sequence of impacts.

    When the orbit stops early, the last row carries a non-zero ``status``, the
    center at which the step failed in ``center_before`` and NaN elsewhere;
    ``error`` holds the exception.
    """

    t_impact: np.ndarray
    impact: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    center_before: np.ndarray
    center_after: np.ndarray
    arc_angle: np.ndarray
    status: np.ndarray
    integral_value: Optional[np.ndarray] = None
    error: Optional[MagBillError] = None

    def __len__(self):
        return len(self.t_impact)

    def __getitem__(self, k):
        iv = None if self.integral_value is None else float(self.integral_value[k])
        return OrbitRecord(
            k if k >= 0 else len(self) + k,
            float(self.t_impact[k]),
            self.impact[k],
            self.v_in[k],
            self.v_out[k],
            self.center_before[k],
            self.center_after[k],
            float(self.arc_angle[k]),
            iv,
            int(self.status[k]),
        )

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def complete(self):
        return self.error is None

    @property
    def centers(self):
        """Successive centers: the start followed by every successful image."""
        ok = self.status == OK
        if len(self) == 0:
            return np.empty((0, 2))
        return np.vstack([self.center_before[:1], self.center_after[ok]])


def reflect(v, n):
    """Mirror ``v`` in the line orthogonal to ``n``: ``v - 2<n,v> n``."""
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    return v - 2.0 * dot(n, v)[..., None] * n


def _classify(boundary, centers, r, found, dn):
    """Status of centers whose circle was not found or meets the boundary almost tangentially."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    dmin, dmax = boundary.distance_extremes(centers)
    status = np.zeros(len(centers), dtype=int)
    fixed = (np.abs(dmin - r) < FIXED_TOL) | (np.abs(dmax - r) < FIXED_TOL)
    outside = ~fixed & ((dmin > r) | (dmax < r))
    graze = ~fixed & ~outside & found & (np.abs(dn) < GRAZING_TOL)
    missing = ~fixed & ~outside & ~found
    status[fixed] = FIXED
    status[outside | missing] = NO_IMPACT
    status[graze] = GRAZING
    return status


def _raise_for(status, center):
    point = np.array(center, dtype=float)
    where = f"center ({point[0]:.17g}, {point[1]:.17g})"
    if status == FIXED:
        raise FixedBoundaryPoint(f"{where} lies on a parallel curve; M is the identity there", point)
    if status == GRAZING:
        raise GrazingImpact(f"{where}: Larmor circle meets the boundary tangentially")
    if status == NO_IMPACT:
        raise NoImpact(f"{where}: Larmor circle does not cross the boundary")


def _exit_scalar(boundary, cx, cy, r):
    """Entry/exit data for one center with plain floats; raises on degenerate circles."""
    hit = boundary.hit_scalar(cx, cy, r)
    if hit is None:
        _raise_for(int(_classify(boundary, [cx, cy], r, np.array([False]), np.array([1.0]))[0]), (cx, cy))
        raise NoImpact(f"no crossing found for center ({cx}, {cy})")
    t_in, t_out = hit
    qx, qy, tx, ty = boundary.frame_scalar(t_out)
    vx, vy = (cy - qy) / r, (qx - cx) / r
    dn = vx * ty - vy * tx  # <v, n_out> with n_out = (ty, -tx)
    if abs(dn) < SUSPICIOUS:
        status = int(_classify(boundary, [cx, cy], r, np.array([True]), np.array([dn]))[0])
        if status != OK:
            _raise_for(status, (cx, cy))
    return t_in, t_out, qx, qy, tx, ty, vx, vy, dn


def _arc_angle(cx, cy, ax, ay, bx, by):
    """Counterclockwise angle about ``c`` from ``a`` to ``b`` in ``(0, 2pi]``."""
    ux, uy = ax - cx, ay - cy
    wx, wy = bx - cx, by - cy
    ang = math.atan2(ux * wy - uy * wx, ux * wx + uy * wy) % TWO_PI
    return ang if ang > 0.0 else TWO_PI


def next_hit(state, boundary):
    """Exit impact of the current Larmor arc: ``(t, Q, arc_angle)``."""
    r = state.params.r
    cx, cy = state.center()
    t_in, t_out, qx, qy, *_ = _exit_scalar(boundary, float(cx), float(cy), r)
    arc = _arc_angle(cx, cy, state.x[0], state.x[1], qx, qy)
    return t_out, np.array([qx, qy]), arc


def billiard_step(state, boundary):
    """Fly to the next impact and reflect there."""
    r = state.params.r
    c = state.center()
    t, q, _ = next_hit(state, boundary)
    v_in = velocity_from_center(c, q, r)
    v_out = reflect(v_in, boundary.outward_normal(t))
    return LarmorState(q, v_out, state.params)


class MapResult(NamedTuple):
    centers: np.ndarray
    impact: np.ndarray
    t_impact: np.ndarray
    t_entry: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    status: np.ndarray


def center_map_batch(points, boundary, params):
    """Apply ``M`` to many centers at once.

    Failed rows keep their input center and carry a non-zero status
    (FIXED, GRAZING or NO_IMPACT).
    """
    r = params.r if isinstance(params, MagneticParams) else float(params)
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    t_in, t_out, found = boundary.hits(P, r)
    t_safe = np.where(found, t_out, 0.0)
    Q = boundary.eval(t_safe)
    tau = boundary.tangent(t_safe)
    n_out = -rotate90(tau)
    v_in = rotate90(Q - P) / r
    dn = dot(v_in, n_out)
    status = np.zeros(len(P), dtype=int)
    suspicious = ~found | (np.abs(dn) < SUSPICIOUS)
    if suspicious.any():
        status[suspicious] = _classify(boundary, P[suspicious], r, found[suspicious], dn[suspicious])
    v_out = v_in - 2.0 * dn[:, None] * n_out
    image = Q + r * rotate90(v_out)
    ok = status == OK
    image = np.where(ok[:, None], image, P)
    return MapResult(image, Q, t_out, t_in, v_in, v_out, status)


def center_map_M(P, boundary, params, identity_on_boundary=False):
    """The billiard map on Larmor centers.

    Raises FixedBoundaryPoint for centers on the parallel curves unless
    ``identity_on_boundary`` is set, in which case such centers are returned
    unchanged (M is the identity there).
    """
    P = np.asarray(P, dtype=float)
    res = center_map_batch(P, boundary, params)
    for k in np.nonzero(res.status != OK)[0]:
        if identity_on_boundary and res.status[k] == FIXED:
            continue
        _raise_for(int(res.status[k]), res.centers[k])
    return res.centers.reshape(P.shape)


def orbit(start, boundary, params, n_steps, integral=None):
    """Follow ``n_steps`` impacts from a LarmorState or a center point.

    ``integral`` is an optional vectorized callable ``f(x, v)`` evaluated at each
    post-reflection state. The first error truncates the orbit and is recorded
    in a flagged final row.
    """
    r = params.r
    if isinstance(start, LarmorState):
        if start.params.r != r:
            raise InvalidState("state and params disagree on the Larmor radius")
        if np.any(boundary.radial_offset(start.x) > 1e-9):
            raise InvalidState(f"start point {start.x} lies outside the domain")
        cx, cy = (float(z) for z in start.center())
        px, py = float(start.x[0]), float(start.x[1])
        from_center = False
    else:
        cx, cy = (float(z) for z in np.asarray(start, dtype=float).reshape(2))
        from_center = True

    rows = []
    error = None
    for step in range(int(n_steps)):
        try:
            t_in, t_out, qx, qy, tx, ty, vx, vy, dn = _exit_scalar(boundary, cx, cy, r)
        except MagBillError as exc:
            error = exc
            break
        if from_center:
            px, py, _, _ = boundary.frame_scalar(t_in)
            from_center = False
        arc = _arc_angle(cx, cy, px, py, qx, qy)
        # v_out = v_in - 2 dn n_out, n_out = (ty, -tx); new center Q + r J v_out
        wx = vx - 2.0 * dn * ty
        wy = vy + 2.0 * dn * tx
        ncx, ncy = qx - r * wy, qy + r * wx
        rows.append((t_out, qx, qy, vx, vy, wx, wy, cx, cy, ncx, ncy, arc))
        cx, cy, px, py = ncx, ncy, qx, qy

    if error is not None:
        nan = math.nan
        rows.append((nan, nan, nan, nan, nan, nan, nan, cx, cy, nan, nan, nan))
    data = np.array(rows, dtype=float).reshape(-1, 12)
    status = np.zeros(len(data), dtype=int)
    if error is not None:
        status[-1] = _status_of(error)
    values = None
    if integral is not None:
        values = np.full(len(data), np.nan)
        ok = status == OK
        if ok.any():
            values[ok] = integral(data[ok, 1:3], data[ok, 5:7])
    return Orbit(
        t_impact=data[:, 0],
        impact=data[:, 1:3],
        v_in=data[:, 3:5],
        v_out=data[:, 5:7],
        center_before=data[:, 7:9],
        center_after=data[:, 9:11],
        arc_angle=data[:, 11],
        status=status,
        integral_value=values,
        error=error,
    )


def _status_of(exc):
    if isinstance(exc, FixedBoundaryPoint):
        return FIXED
    if isinstance(exc, GrazingImpact):
        return GRAZING
    return NO_IMPACT


# -- circle rotation law --------------------------------------------------------


def rotation_angle_circle(d, r, rho):
    """Angle ``alpha = 2 arccos((rho^2 + d^2 - r^2) / (2 rho d))`` for a circular table.

    Evaluated through half-angle products so that the annulus edges give exactly
    ``0`` (``rho = r + d``) and ``2 pi`` (``rho = r - d``).
    """
    if not r > d:
        raise OutsideAnnulus(f"the phase space is an annulus only for r > d (got r={r}, d={d})")
    rho_arr = np.asarray(rho, dtype=float)
    tol = 1e-12 * (r + d)
    if np.any(rho_arr < r - d - tol) or np.any(rho_arr > r + d + tol):
        raise OutsideAnnulus(f"rho must lie in [{r - d}, {r + d}], got {rho}")
    # 1 - u and 1 + u as factored products (common factor 1/(2 rho d) dropped)
    one_minus = np.maximum((r - rho_arr + d) * (r + rho_arr - d), 0.0)
    one_plus = np.maximum((rho_arr + d - r) * (rho_arr + d + r), 0.0)
    alpha = 4.0 * np.arctan2(np.sqrt(one_minus), np.sqrt(one_plus))
    return float(alpha) if alpha.ndim == 0 else alpha


def rotation_number_estimate(centers, origin=(0.0, 0.0)):
    """Mean polar-angle advance per step about ``origin`` divided by ``2 pi``.

    Each step's advance is taken in ``[0, 2 pi)``, which is the continuous lift
    for maps that move points counterclockwise around the annulus.
    """
    c = np.asarray(centers, dtype=float).reshape(-1, 2) - np.asarray(origin, dtype=float)
    if len(c) < 2:
        return 0.0
    rad = norm(c)
    if np.min(rad) < 1e-12:
        raise NotAnnular("orbit passes through the reference point; no polar angle")
    ang = np.arctan2(c[:, 1], c[:, 0])
    inc = np.mod(np.diff(ang), TWO_PI)
    inc[inc >= TWO_PI] = 0.0
    return float(np.mean(inc) / TWO_PI)


def radial_scatter(points, about=(0.0, 0.0)):
    """Spread ``max |p - about| - min |p - about|`` of a point cloud."""
    rad = norm(np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(about, dtype=float))
    return float(rad.max() - rad.min()) if rad.size else 0.0


# -- Jacobians and Lyapunov exponents ---------------------------------------------


def jacobian_det(map_fn, points, h=3e-5):
    """Finite-difference Jacobian determinant of a vectorized planar map.

    Fourth-order central stencil; ``h`` may be a scalar or one step per point.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    h = np.broadcast_to(np.asarray(h, dtype=float), (len(P),))[:, None]
    offsets = []
    for axis in (0, 1):
        e = np.zeros((1, 2))
        e[0, axis] = 1.0
        offsets += [2 * e * h, e * h, -e * h, -2 * e * h]
    stacked = np.concatenate([P + o for o in offsets])
    img = np.asarray(map_fn(stacked)).reshape(8, len(P), 2)
    dx = (-img[0] + 8 * img[1] - 8 * img[2] + img[3]) / (12 * h)
    dy = (-img[4] + 8 * img[5] - 8 * img[6] + img[7]) / (12 * h)
    return dx[:, 0] * dy[:, 1] - dx[:, 1] * dy[:, 0]


def edge_gap(points, boundary, r):
    """Distance-like gap of centers to the edge of the phase space."""
    dmin, dmax = boundary.distance_extremes(points)
    return np.minimum(np.abs(dmin - r), np.abs(dmax - r))


def map_jacobian_det(points, boundary, params, h=3e-5):
    """Finite-difference Jacobian determinant of M; NaN where a stencil point fails.

    M behaves like a square root near the parallel curves, so the step is
    shrunk to 1/200 of the distance to that edge.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    step = np.minimum(h, edge_gap(P, boundary, params.r) / 200.0)

    def fn(pts):
        res = center_map_batch(pts, boundary, params)
        return np.where((res.status == OK)[:, None], res.centers, np.nan)

    return jacobian_det(fn, P, step)


class LyapunovEstimate(NamedTuple):
    exponent: float
    stderr: float
    iterations: int
    complete: bool


def lyapunov_scan(starts, boundary, params, n_iters, seed=0, offset=1e-7, n_blocks=10):
    """Largest Lyapunov exponent of M for many starting centers at once.

    Two-trajectory method: a companion point at distance ``offset`` (random
    direction from ``seed``) is pushed along and pulled back to distance
    ``offset`` after every step. The first tenth of the iterations is discarded
    as transient; the standard error comes from ``n_blocks`` block means.
    """
    P = np.asarray(starts, dtype=float).reshape(-1, 2).copy()
    m = len(P)
    rng = make_rng(seed)
    phi = rng.uniform(0.0, TWO_PI, size=m)
    Q = P + offset * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    logs = np.zeros((m, int(n_iters)))
    alive = np.ones(m, dtype=bool)
    done = np.zeros(m, dtype=int)
    for k in range(int(n_iters)):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        res = center_map_batch(np.concatenate([P[idx], Q[idx]]), boundary, params)
        good = (res.status[: idx.size] == OK) & (res.status[idx.size :] == OK)
        P_new = res.centers[: idx.size]
        Q_new = res.centers[idx.size :]
        sep = norm(Q_new - P_new)
        good &= sep > 0
        alive[idx[~good]] = False
        g = idx[good]
        sep = sep[good]
        logs[g, k] = np.log(sep / offset)
        done[g] = k + 1
        P[g] = P_new[good]
        Q[g] = P_new[good] + (Q_new[good] - P_new[good]) * (offset / sep)[:, None]

    out = []
    for i in range(m):
        n = done[i]
        burn = n // 10
        tail = logs[i, burn:n]
        if tail.size == 0:
            out.append(LyapunovEstimate(math.nan, math.nan, int(n), False))
            continue
        lam = float(tail.mean())
        blocks = [b.mean() for b in np.array_split(tail, min(n_blocks, tail.size))]
        err = float(np.std(blocks, ddof=1) / math.sqrt(len(blocks))) if len(blocks) > 1 else math.nan
        out.append(LyapunovEstimate(lam, err, int(n), bool(n == n_iters)))
    return out


def lyapunov_estimate(P, boundary, params, n_iters, seed=0, offset=1e-7):
    """Largest Lyapunov exponent per iteration of M started at center ``P``."""
    return lyapunov_scan([P], boundary, params, n_iters, seed=seed, offset=offset)[0]


# -- phase portraits -----------------------------------------------------------------


@dataclass
class PhasePortrait:
    """Center orbits plus Birkhoff coordinates (impact parameter, tangential velocity)."""

    orbit_id: np.ndarray
    step: np.ndarray
    centers: np.ndarray
    t_impact: np.ndarray
    tangential_velocity: np.ndarray
    errors: dict

    def __len__(self):
        return len(self.orbit_id)

    def orbit_points(self, k):
        return self.centers[self.orbit_id == k]


def phase_portrait(boundary, params, n_seeds, n_iters, seed=0, starts=None):
    """Iterate M from ``n_seeds`` random centers (or the given ``starts``).

    Each recorded row is an image center with the impact that produced it.
    Orbits that fail are stopped and listed in ``errors`` (id -> status name).
    """
    if starts is None:
        starts = sample_phase_space(boundary, params.r, int(n_seeds), make_rng(seed))
    P = np.asarray(starts, dtype=float).reshape(-1, 2).copy()
    m = len(P)
    alive = np.ones(m, dtype=bool)
    ids, steps, cs, ts, tv = [], [], [], [], []
    errors = {}
    for k in range(int(n_iters)):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        res = center_map_batch(P[idx], boundary, params)
        ok = res.status == OK
        for j in np.nonzero(~ok)[0]:
            errors[int(idx[j])] = STATUS_NAMES[int(res.status[j])]
        alive[idx[~ok]] = False
        g = idx[ok]
        P[g] = res.centers[ok]
        tau = boundary.tangent(res.t_impact[ok])
        ids.append(g)
        steps.append(np.full(g.size, k))
        cs.append(res.centers[ok])
        ts.append(np.mod(res.t_impact[ok], boundary.period))
        tv.append(dot(res.v_out[ok], tau))
    if ids:
        order = np.lexsort((np.concatenate(steps), np.concatenate(ids)))
        cat = lambda parts: np.concatenate(parts)[order]  # noqa: E731
        return PhasePortrait(cat(ids), cat(steps), cat(cs), cat(ts), cat(tv), errors)
    empty = np.empty(0)
    return PhasePortrait(empty.astype(int), empty.astype(int), np.empty((0, 2)), empty, empty, errors)


# -- output ------------------------------------------------------------------------------

ORBIT_COLUMNS = [
    "step", "t_impact", "qx", "qy", "vx_out", "vy_out",
    "cx_before", "cy_before", "cx_after", "cy_after", "arc_angle", "integral_value",
]
PORTRAIT_COLUMNS = ["orbit_id", "step", "cx", "cy", "t_impact", "tangential_velocity"]


def fmt(x):
    """17 significant digits, enough to round-trip a double."""
    return "%.17g" % x


def open_text(target):
    """Open ``target`` for writing unless it already is a text stream."""
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w", newline="")


def write_orbit_csv(orb, path):
    with open_text(path) as fh:
        w = csv.writer(fh)
        w.writerow(ORBIT_COLUMNS)
        for k in range(len(orb)):
            iv = "" if orb.integral_value is None else fmt(orb.integral_value[k])
            w.writerow(
                [k]
                + [fmt(orb.t_impact[k]), fmt(orb.impact[k, 0]), fmt(orb.impact[k, 1])]
                + [fmt(z) for z in orb.v_out[k]]
                + [fmt(z) for z in orb.center_before[k]]
                + [fmt(z) for z in orb.center_after[k]]
                + [fmt(orb.arc_angle[k]), iv]
            )


def write_portrait_csv(portrait, path):
    with open_text(path) as fh:
        w = csv.writer(fh)
        w.writerow(PORTRAIT_COLUMNS)
        for k in range(len(portrait)):
            w.writerow([
                int(portrait.orbit_id[k]),
                int(portrait.step[k]),
                fmt(portrait.centers[k, 0]),
                fmt(portrait.centers[k, 1]),
                fmt(portrait.t_impact[k]),
                fmt(portrait.tangential_velocity[k]),
            ])


def write_portrait_svg(portrait, path, boundary, r, size=800):
    """Static SVG: the boundary as a polyline and one point group per orbit."""
    lo, hi = boundary.bounding_box()
    lo = lo - r
    hi = hi + r
    span = float(max(hi - lo))
    dot_r = span / 800.0
    curve = boundary.eval(np.linspace(0.0, boundary.period, 512))
    # flip y so that the picture has the usual orientation
    pts = " ".join(f"{x:.6g},{-y:.6g}" for x, y in curve)
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{lo[0]:.6g} {-hi[1]:.6g} {hi[0] - lo[0]:.6g} {hi[1] - lo[1]:.6g}">',
        f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="{2 * dot_r:.3g}"/>',
    ]
    for k in np.unique(portrait.orbit_id):
        color = palette[int(k) % len(palette)]
        lines.append(f'<g fill="{color}">')
        for x, y in portrait.orbit_points(k):
            lines.append(f'<circle cx="{x:.6g}" cy="{-y:.6g}" r="{dot_r:.3g}"/>')
        lines.append("</g>")
    lines.append("</svg>")
    with open_text(path) as fh:
        fh.write("\n".join(lines) + "\n")
