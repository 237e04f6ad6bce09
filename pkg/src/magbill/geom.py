"""Plane primitives, convex boundaries, Larmor geometry and parallel curves.

Points and vectors are numpy arrays with a trailing axis of length 2; every
boundary method accepts a scalar or an array of parameters and broadcasts.
Boundaries are oriented counterclockwise and parametrized by a free periodic
parameter (not arclength).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _numerics
from .errors import (
    BoundarySpecError,
    CuspSingularity,
    InadmissibleField,
    InvalidVelocity,
    OffCircle,
)

TWO_PI = 2.0 * math.pi
UNIT_TOL = 1e-9
ADMISSIBILITY_MARGIN = 1e-9
CURVATURE_GRID = 4096


def rotate90(w):
    """Counterclockwise rotation by a right angle (the complex structure J)."""
    w = np.asarray(w)
    return np.stack([-w[..., 1], w[..., 0]], axis=-1)


def norm(w):
    w = np.asarray(w)
    return np.hypot(w[..., 0], w[..., 1])


def normalize(w):
    w = np.asarray(w, dtype=float)
    return w / norm(w)[..., None]


def dot(u, w):
    u = np.asarray(u)
    w = np.asarray(w)
    return u[..., 0] * w[..., 0] + u[..., 1] * w[..., 1]


def cross(u, w):
    u = np.asarray(u)
    w = np.asarray(w)
    return u[..., 0] * w[..., 1] - u[..., 1] * w[..., 0]


def larmor_center(x, v, r):
    """Center of the counterclockwise Larmor circle through ``x`` with velocity ``v``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(norm(v) - 1.0) > UNIT_TOL):
        raise InvalidVelocity(f"velocity must be a unit vector, got |v|={norm(v)}")
    return x + r * rotate90(v)


def velocity_from_center(c, x, r):
    """Unit velocity at ``x`` on the counterclockwise circle of radius ``r`` about ``c``."""
    c = np.asarray(c, dtype=float)
    x = np.asarray(x, dtype=float)
    gap = np.abs(norm(x - c) - r)
    if np.any(gap > UNIT_TOL):
        raise OffCircle(f"point is {np.max(gap):.3g} away from the circle of radius {r}")
    return rotate90(x - c) / r


@dataclass(frozen=True)
class MagneticParams:
    """Field magnitude ``beta`` and the Larmor radius ``r = 1/beta``."""

    beta: float
    r: float = field(init=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "r", 1.0 / self.beta)

    @classmethod
    def from_radius(cls, r):
        return cls(1.0 / r)

    def admissible(self, boundary):
        return admissible(boundary, self.beta)

    def require_admissible(self, boundary):
        kmin = min_curvature(boundary)
        if not self.beta < kmin - ADMISSIBILITY_MARGIN:
            raise InadmissibleField(
                f"beta={self.beta} must be below the minimal curvature {kmin:.12g} of {boundary}"
            )


class Boundary:
    """Closed strictly convex curve, counterclockwise, periodic in ``t``.

    Subclasses implement :meth:`eval` and :meth:`deriv`; everything else has a
    generic implementation that concrete curves may replace by closed forms.
    Setting ``analytic = False`` on an instance forces the generic routes.
    """

    period = TWO_PI
    analytic = True

    @property
    def reference_point(self):
        return np.zeros(2)

    def eval(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def deriv2(self, t, h=1e-5):
        t = np.asarray(t, dtype=float)
        return (self.deriv(t + h) - self.deriv(t - h)) / (2 * h)

    def tangent(self, t):
        return normalize(self.deriv(t))

    def outward_normal(self, t):
        return -rotate90(self.tangent(t))

    def curvature(self, t):
        d1 = self.deriv(t)
        return cross(d1, self.deriv2(t)) / norm(d1) ** 3

    # -- scalar fast paths used by sequential orbits -------------------------

    def frame_scalar(self, t):
        """Point and unit tangent at a scalar parameter as four floats."""
        p = self.eval(t)
        tau = self.tangent(t)
        return float(p[0]), float(p[1]), float(tau[0]), float(tau[1])

    def hit_scalar(self, cx, cy, r):
        """``(t_entry, t_exit)`` for one circle, or None when no crossing is found."""
        t_in, t_out, found = self.hits(np.array([[cx, cy]]), r)
        if not found[0]:
            return None
        return float(t_in[0]), float(t_out[0])

    # -- circle intersections ------------------------------------------------

    def hits(self, centers, r):
        """Crossings of the circles ``|p - c| = r`` with the boundary.

        Returns ``(t_entry, t_exit, found)``. Along increasing ``t`` the boundary
        enters the disc at ``t_exit`` (where a counterclockwise Larmor arc leaves
        the domain) and leaves it at ``t_entry``.
        """
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        n = centers.shape[0]

        def g(t, i):
            p = self.eval(t)
            return (p[..., 0] - centers[i, 0]) ** 2 + (p[..., 1] - centers[i, 1]) ** 2 - r * r

        rows, roots, direction = _numerics.periodic_roots(g, n, self.period)
        t_in = np.full(n, np.nan)
        t_out = np.full(n, np.nan)
        n_in = np.bincount(rows[direction > 0], minlength=n)
        n_out = np.bincount(rows[direction < 0], minlength=n)
        t_in[rows[direction > 0]] = roots[direction > 0]
        t_out[rows[direction < 0]] = roots[direction < 0]
        found = (n_in == 1) & (n_out == 1)
        return t_in, t_out, found

    def distance_extremes(self, points):
        """Minimum and maximum distance from each point to the curve."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)

        def d2(t, i):
            p = self.eval(t)
            return (p[..., 0] - points[i, 0]) ** 2 + (p[..., 1] - points[i, 1]) ** 2

        _, fmin, _, fmax = _numerics.periodic_extremes(d2, points.shape[0], self.period)
        return np.sqrt(np.maximum(fmin, 0.0)), np.sqrt(fmax)

    # -- inside test -----------------------------------------------------------

    def radial_offset(self, points):
        """Signed offset ``|p - o| - |gamma(t) - o|`` along the ray from the reference point.

        ``t`` solves the direction-matching equation; it is monotone for a
        star-shaped curve, so bisection is safe.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        o = self.reference_point
        rel = points - o
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        m = 256
        h = self.period / m
        grid = np.arange(m + 1) * h
        rays = self.eval(grid) - o
        psi = np.unwrap(np.arctan2(rays[:, 1], rays[:, 0]))
        target = psi[0] + np.mod(theta - psi[0], TWO_PI)
        k = np.clip(np.searchsorted(psi, target, side="right") - 1, 0, m - 1)

        def mismatch(t, i):
            q = self.eval(t) - o
            ang = np.arctan2(q[..., 1], q[..., 0]) - theta[i]
            return np.mod(ang + math.pi, TWO_PI) - math.pi

        t = _numerics.refine_brackets(mismatch, np.arange(len(points)), grid[k], grid[k + 1], tol=1e-12)
        return norm(rel) - norm(self.eval(t) - o)

    def inside(self, points):
        return self.radial_offset(points) <= 0.0

    def bounding_box(self, n=4096):
        p = self.eval(np.linspace(0.0, self.period, n, endpoint=False))
        return p.min(axis=0), p.max(axis=0)


class Circle(Boundary):
    def __init__(self, d, center=(0.0, 0.0), analytic=True):
        if not d > 0:
            raise BoundarySpecError(f"circle radius must be positive, got {d}")
        self.d = float(d)
        self.center = np.asarray(center, dtype=float)
        self.analytic = analytic

    def __repr__(self):
        return f"Circle(d={self.d}, center=({self.center[0]}, {self.center[1]}))"

    @property
    def reference_point(self):
        return self.center

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + self.d * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return self.d * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def deriv2(self, t, h=None):
        t = np.asarray(t, dtype=float)
        return -self.d * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def curvature(self, t):
        return np.full(np.shape(t), 1.0 / self.d)

    def frame_scalar(self, t):
        c, s = math.cos(t), math.sin(t)
        return self.center[0] + self.d * c, self.center[1] + self.d * s, -s, c

    def hit_scalar(self, cx, cy, r):
        if not self.analytic:
            return super().hit_scalar(cx, cy, r)
        dx, dy = cx - self.center[0], cy - self.center[1]
        rho = math.hypot(dx, dy)
        if rho == 0.0:
            return None
        u = (self.d * self.d + rho * rho - r * r) / (2.0 * self.d * rho)
        if not -1.0 < u < 1.0:
            return None
        phi = math.atan2(dy, dx)
        delta = math.acos(u)
        return phi + delta, phi - delta

    def hits(self, centers, r):
        if not self.analytic:
            return super().hits(centers, r)
        rel = np.asarray(centers, dtype=float).reshape(-1, 2) - self.center
        rho = norm(rel)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (self.d**2 + rho**2 - r * r) / (2.0 * self.d * rho)
        found = (u > -1.0) & (u < 1.0)
        delta = np.arccos(np.clip(u, -1.0, 1.0))
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        t_in = np.where(found, phi + delta, np.nan)
        t_out = np.where(found, phi - delta, np.nan)
        return t_in, t_out, found

    def distance_extremes(self, points):
        if not self.analytic:
            return super().distance_extremes(points)
        rho = norm(np.asarray(points, dtype=float).reshape(-1, 2) - self.center)
        return np.abs(rho - self.d), rho + self.d

    def radial_offset(self, points):
        if not self.analytic:
            return super().radial_offset(points)
        return norm(np.asarray(points, dtype=float).reshape(-1, 2) - self.center) - self.d


class Ellipse(Boundary):
    """``x^2/a^2 + y^2/b^2 = 1`` parametrized by ``(a cos t, b sin t)``."""

    def __init__(self, a, b, analytic=True):
        if not (a > 0 and b > 0):
            raise BoundarySpecError(f"ellipse semi-axes must be positive, got a={a}, b={b}")
        self.a = float(a)
        self.b = float(b)
        self.analytic = analytic

    def __repr__(self):
        return f"Ellipse(a={self.a}, b={self.b})"

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.sin(t), self.b * np.cos(t)], axis=-1)

    def deriv2(self, t, h=None):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.cos(t), -self.b * np.sin(t)], axis=-1)

    def frame_scalar(self, t):
        c, s = math.cos(t), math.sin(t)
        tx, ty = -self.a * s, self.b * c
        ln = math.hypot(tx, ty)
        return self.a * c, self.b * s, tx / ln, ty / ln

    def hit_scalar(self, cx, cy, r):
        if not self.analytic or self.a == self.b:
            return super().hit_scalar(cx, cy, r)
        a, b = self.a, self.b
        lead = (a * a - b * b) / 4.0
        z = np.roots([lead, -a * cx + 1j * b * cy, (a * a + b * b) / 2.0 + cx * cx + cy * cy - r * r,
                      -a * cx - 1j * b * cy, lead])
        t_in = t_out = None
        n_unit = 0
        for zk in z:
            if abs(abs(zk) - 1.0) >= 1e-6:
                continue
            n_unit += 1
            t = math.atan2(zk.imag, zk.real)
            for _ in range(3):
                c, s = math.cos(t), math.sin(t)
                wx, wy = a * c - cx, b * s - cy
                gp = 2.0 * (-wx * a * s + wy * b * c)
                if abs(gp) > 1e-12:
                    t -= max(-1e-3, min(1e-3, (wx * wx + wy * wy - r * r) / gp))
            c, s = math.cos(t), math.sin(t)
            slope = -(a * c - cx) * a * s + (b * s - cy) * b * c
            if slope < 0:
                t_out = t
            elif slope > 0:
                t_in = t
        if n_unit != 2 or t_in is None or t_out is None:
            return None
        return t_in, t_out

    def hits(self, centers, r):
        if not self.analytic:
            return super().hits(centers, r)
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        if self.a == self.b:
            return Circle(self.a).hits(centers, r)
        t_in, t_out, found = self._hits_scan(centers, r)
        rest = ~found
        if rest.any():
            t_in[rest], t_out[rest], found[rest] = self._hits_quartic(centers[rest], r)
        return t_in, t_out, found

    def _hits_scan(self, centers, r, m=64):
        """Coarse sign scan plus bracketed Newton; rows without exactly two crossings are left unfound."""
        a, b = self.a, self.b
        cx, cy = centers[:, 0:1], centers[:, 1:2]
        grid = np.arange(m + 1) * (TWO_PI / m)
        g = (a * np.cos(grid) - cx) ** 2 + (b * np.sin(grid) - cy) ** 2 - r * r
        pos = g > 0
        change = pos[:, :-1] != pos[:, 1:]
        found = change.sum(axis=1) == 2
        k_out = np.argmax(change & pos[:, :-1], axis=1)
        k_in = np.argmax(change & ~pos[:, :-1], axis=1)
        lo = np.concatenate([grid[k_out], grid[k_in]])
        hi = lo + TWO_PI / m
        px = np.concatenate([cx[:, 0], cx[:, 0]])
        py = np.concatenate([cy[:, 0], cy[:, 0]])
        g_lo = (a * np.cos(lo) - px) ** 2 + (b * np.sin(lo) - py) ** 2 - r * r
        t = 0.5 * (lo + hi)
        for _ in range(40):
            c, s = np.cos(t), np.sin(t)
            wx, wy = a * c - px, b * s - py
            val = wx * wx + wy * wy - r * r
            slope = 2.0 * (-wx * a * s + wy * b * c)
            same = np.sign(val) == np.sign(g_lo)
            lo = np.where(same, t, lo)
            g_lo = np.where(same, val, g_lo)
            hi = np.where(same, hi, t)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = t - val / slope
            inside = (newton >= lo) & (newton <= hi)
            t_next = np.where(inside, newton, 0.5 * (lo + hi))
            if np.all(np.abs(t_next - t) < 1e-14):
                t = t_next
                break
            t = t_next
        n = len(centers)
        t_out = np.where(found, t[:n], np.nan)
        t_in = np.where(found, t[n:], np.nan)
        return t_in, t_out, found

    def _hits_quartic(self, centers, r):
        """All circle crossings from the eigenvalues of a quartic in ``exp(it)``."""
        a, b = self.a, self.b
        cx, cy = centers[:, 0], centers[:, 1]
        n = centers.shape[0]
        # |E(t) - c|^2 - r^2 with z = exp(it), multiplied by z^2
        lead = (a * a - b * b) / 4.0
        p0 = np.full(n, lead, dtype=complex)
        p1 = -a * cx - 1j * b * cy
        p2 = (a * a + b * b) / 2.0 + cx * cx + cy * cy - r * r + 0j
        p3 = -a * cx + 1j * b * cy
        comp = np.zeros((n, 4, 4), dtype=complex)
        comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
        comp[:, 0, 3] = -p0 / lead
        comp[:, 1, 3] = -p1 / lead
        comp[:, 2, 3] = -p2 / lead
        comp[:, 3, 3] = -p3 / lead
        z = np.linalg.eigvals(comp)
        on_unit = np.abs(np.abs(z) - 1.0) < 1e-6
        t = np.angle(z)
        c = centers[:, None, :]
        for _ in range(3):
            p = self.eval(t)
            dp = self.deriv(t)
            w = p - c
            g = dot(w, w) - r * r
            gp = 2.0 * dot(w, dp)
            step = np.where(np.abs(gp) > 1e-12, g / np.where(gp == 0, 1.0, gp), 0.0)
            t = t - np.clip(step, -1e-3, 1e-3)
        slope = dot(self.eval(t) - c, self.deriv(t))
        s_exit = np.where(on_unit, slope, np.inf)
        s_entry = np.where(on_unit, slope, -np.inf)
        k_exit = np.argmin(s_exit, axis=1)
        k_entry = np.argmax(s_entry, axis=1)
        rows = np.arange(n)
        found = (on_unit.sum(axis=1) == 2) & (s_exit[rows, k_exit] < 0) & (s_entry[rows, k_entry] > 0)
        t_out = np.where(found, t[rows, k_exit], np.nan)
        t_in = np.where(found, t[rows, k_entry], np.nan)
        return t_in, t_out, found

    def radial_offset(self, points):
        if not self.analytic:
            return super().radial_offset(points)
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        rho = norm(p)
        # |p| * (1 - 1/sqrt(q)) has the sign of q - 1 for q = x^2/a^2 + y^2/b^2
        q = (p[:, 0] / self.a) ** 2 + (p[:, 1] / self.b) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            radius = np.where(q > 0, rho / np.sqrt(q), 0.0)
        return rho - radius


class FourierBoundary(Boundary):
    """Radial graph ``rho(theta) = base + sum amp*cos(k*theta + phase)`` about the origin."""

    def __init__(self, base, terms=()):
        self.base = float(base)
        self.terms = tuple((int(k), float(amp), float(ph)) for k, amp, ph in terms)
        th = np.linspace(0.0, TWO_PI, CURVATURE_GRID, endpoint=False)
        if np.min(self._rho(th, 0)) <= 0:
            raise BoundarySpecError("radial function must stay positive")
        if np.min(self.curvature(th)) <= 0:
            raise BoundarySpecError("Fourier boundary is not strictly convex")

    def __repr__(self):
        return f"FourierBoundary(base={self.base}, terms={list(self.terms)})"

    def _rho(self, th, order):
        th = np.asarray(th, dtype=float)
        out = np.full(th.shape, self.base if order == 0 else 0.0)
        for k, amp, ph in self.terms:
            arg = k * th + ph
            if order == 0:
                out = out + amp * np.cos(arg)
            elif order == 1:
                out = out - amp * k * np.sin(arg)
            else:
                out = out - amp * k * k * np.cos(arg)
        return out

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return self._rho(t, 0)[..., None] * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return self._rho(t, 1)[..., None] * e + self._rho(t, 0)[..., None] * rotate90(e)

    def deriv2(self, t, h=None):
        t = np.asarray(t, dtype=float)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        r0, r1, r2 = (self._rho(t, k)[..., None] for k in range(3))
        return (r2 - r0) * e + 2.0 * r1 * rotate90(e)


class ParallelCurve(Boundary):
    """Parallel curve ``gamma + sign * r * J tau`` of a boundary.

    ``sign=+1`` gives the inner curve (requires ``r*k > 1``); the inherited
    parametrization is then still counterclockwise.
    """

    def __init__(self, base, r, sign=+1):
        self.base = base
        self.r = float(r)
        self.sign = 1 if sign > 0 else -1

    def __repr__(self):
        return f"ParallelCurve({self.base!r}, r={self.r}, sign={self.sign:+d})"

    @property
    def reference_point(self):
        return self.base.reference_point

    def eval(self, t):
        return self.base.eval(t) + self.sign * self.r * rotate90(self.base.tangent(t))

    def deriv(self, t):
        factor = 1.0 - self.sign * self.r * self.base.curvature(t)
        return factor[..., None] * self.base.deriv(t)

    def curvature(self, t):
        return parallel_curvature(self.base.curvature(t), self.r, self.sign)


def parallel_point(boundary, t, sign, r):
    """Point of the parallel curve at distance ``r`` from ``boundary.eval(t)``."""
    s = _sign(sign)
    return boundary.eval(t) + s * r * rotate90(boundary.tangent(t))


def parallel_curvature(k, r, sign):
    """Curvature ``k/(r k - 1)`` (sign +) or ``k/(r k + 1)`` (sign -)."""
    s = _sign(sign)
    k = np.asarray(k, dtype=float)
    denom = r * k - 1.0 if s > 0 else r * k + 1.0
    if np.any(denom == 0.0):
        raise CuspSingularity("parallel curve has a cusp where r*k = 1")
    out = k / denom
    return float(out) if out.ndim == 0 else out


def _sign(sign):
    if sign in ("+", "plus", 1, +1):
        return 1
    if sign in ("-", "minus", -1):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def min_curvature(boundary, n_grid=CURVATURE_GRID):
    """Minimal curvature: grid search refined by golden section around the grid minimum."""
    h = boundary.period / n_grid
    t = np.arange(n_grid) * h
    k = boundary.curvature(t)
    j = int(np.argmin(k))
    fn = lambda s, _: boundary.curvature(s)  # noqa: E731
    _, kref = _numerics.golden_minimize(fn, np.zeros(1, dtype=int), [t[j] - h], [t[j] + h])
    return float(min(k[j], kref[0]))


def admissible(boundary, beta):
    """True when ``beta`` is below the minimal curvature (with a safety margin)."""
    return beta < min_curvature(boundary) - ADMISSIBILITY_MARGIN


def sample_phase_space(boundary, r, n, rng, margin=1e-3):
    """``n`` uniform random centers in the phase space, at least ``margin`` from its boundary.

    A center ``P`` is interior when ``min |gamma - P| < r < max |gamma - P|``.
    """
    lo, hi = boundary.bounding_box()
    lo = lo - r
    hi = hi + r
    out = []
    count = 0
    while count < n:
        cand = rng.uniform(lo, hi, size=(max(2 * (n - count), 16), 2))
        dmin, dmax = boundary.distance_extremes(cand)
        ok = (dmin < r - margin) & (dmax > r + margin)
        out.append(cand[ok])
        count += int(ok.sum())
    return np.concatenate(out)[:n] if out else np.empty((0, 2))


def make_rng(seed):
    """Counter-based 64-bit generator (Philox) used for every random draw."""
    return np.random.Generator(np.random.Philox(int(seed)))


def parse_boundary(spec):
    """Parse ``circle:d=..[,cx=..,cy=..]``, ``ellipse:a=..,b=..`` or ``fourier:base=..,terms=k:amp:phase;..``."""
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip().lower()
    fields = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise BoundarySpecError(f"malformed field {item!r} in {spec!r}")
        fields[key.strip().lower()] = value.strip()
    try:
        if kind == "circle":
            _expect(fields, {"d"}, {"cx", "cy"}, spec)
            return Circle(float(fields["d"]), (float(fields.get("cx", 0)), float(fields.get("cy", 0))))
        if kind == "ellipse":
            _expect(fields, {"a", "b"}, set(), spec)
            return Ellipse(float(fields["a"]), float(fields["b"]))
        if kind == "fourier":
            _expect(fields, {"base"}, {"terms"}, spec)
            terms = []
            for term in filter(None, fields.get("terms", "").split(";")):
                k, amp, ph = term.split(":")
                terms.append((int(k), float(amp), float(ph)))
            return FourierBoundary(float(fields["base"]), terms)
    except ValueError as exc:
        if isinstance(exc, BoundarySpecError):
            raise
        raise BoundarySpecError(f"cannot parse {spec!r}: {exc}") from exc
    raise BoundarySpecError(f"unknown boundary kind {kind!r} in {spec!r}")


def _expect(fields, required, optional, spec):
    missing = required - fields.keys()
    unknown = fields.keys() - required - optional
    if missing or unknown:
        raise BoundarySpecError(f"bad fields in {spec!r}: missing {sorted(missing)}, unknown {sorted(unknown)}")
