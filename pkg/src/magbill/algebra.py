"""Algebraic obstructions to polynomial integrals.

The offset (parallel) curves of an ellipse are given by one explicit degree-8
polynomial. A non-circular boundary admitting a polynomial integral would force
those offsets to be smooth in C^2 and to meet the line at infinity only at the
isotropic points or tangentially. This module evaluates that polynomial,
certifies its complex singular points, searches for singular points of general
curves and classifies the points at infinity.
"""

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CertificationFailed, NotOnCurve, OutsideRegime, VanishingGradient
from .geom import Ellipse, make_rng, parallel_point
from .poly import BivarPoly, UniPoly, poly_divmod, ratio_form, root_clusters, uni_roots

CERTIFY_TOL = 1e-6
ON_CURVE_TOL = 1e-8
DEDUP_RADIUS = 1e-6
ISOTROPIC_TOL = 1e-8
TANGENCY_TOL = 1e-8
GRADIENT_GUARD = 1e-10
ROUNDING_TOL = 1e-10

VERDICTS = ("no_obstruction", "obstructed_affine_singularity", "obstructed_transversal_infinity")


def ellipse_offset_poly(a, b, r):
    """Implicit degree-8 equation of both offsets at distance ``r`` of ``x^2/a^2 + y^2/b^2 = 1``."""
    if not (a > 0 and b > 0 and r > 0):
        raise ValueError(f"need a, b, r > 0, got a={a}, b={b}, r={r}")
    x, y = BivarPoly.x(), BivarPoly.y()
    a2, b2, r2 = float(a) ** 2, float(b) ** 2, float(r) ** 2
    x2, y2 = x * x, y * y
    a4, a6, a8 = a2**2, a2**3, a2**4
    b4, b6, b8 = b2**2, b2**3, b2**4
    r4, r6 = r2**2, r2**3
    x4, y4 = x2 * x2, y2 * y2
    x6, y6 = x4 * x2, y4 * y2
    s = x2 + y2 - r2

    t1 = a8 * (b4 + (r2 - y2) ** 2 - 2 * b2 * (r2 + y2))
    t2 = b4 * (r2 - x2) ** 2 * (b4 - 2 * b2 * (r2 - x2 + y2) + s**2)
    t3 = -2 * a6 * (
        b6
        + (r2 - y2) ** 2 * (r2 + x2 - y2)
        - b4 * (r2 - 2 * x2 + 3 * y2)
        - b2 * (r4 + 3 * y2 * (x2 - y2) + r2 * (3 * x2 + 2 * y2))
    )
    t4 = 2 * a2 * b2 * (
        -b6 * (r2 + x2)
        - s**2 * (r4 - x2 * y2 - r2 * (x2 + y2))
        + b4 * (r4 - 3 * x4 + 3 * x2 * y2 + r2 * (2 * x2 + 3 * y2))
        + b2 * (r6 - 2 * x6 + x4 * y2 - 3 * x2 * y4 + r4 * (-4 * x2 + 2 * y2) + r2 * (5 * x4 - 3 * x2 * y2 - 3 * y4))
    )
    t5 = a4 * (
        b8
        + 2 * b6 * (r2 + 3 * x2 - 2 * y2)
        + (r2 - y2) ** 2 * s**2
        - 2 * b4 * (3 * r4 - 3 * x4 + 5 * x2 * y2 - 3 * y4 + 4 * r2 * (x2 + y2))
        + 2 * b2 * (r6 - 3 * x4 * y2 + x2 * y4 - 2 * y6 + 2 * r4 * (x2 - 2 * y2) + r2 * (-3 * x4 - 3 * x2 * y2 + 5 * y4))
    )
    return t1 + t2 + t3 + t4 + t5


def residual_scale(f, points):
    """``max|coef| * max(1, |p|)^deg`` for real or complex points ``(..., 2)``."""
    p = np.asarray(points)
    size = np.sqrt(np.abs(p[..., 0]) ** 2 + np.abs(p[..., 1]) ** 2)
    return f.scale() * np.maximum(1.0, size) ** max(f.degree, 0)


def offset_vanishing_check(a, b, r, n_samples=4096):
    """Max scaled residual of the offset polynomial on both parametric offsets."""
    f = ellipse_offset_poly(a, b, r)
    ellipse = Ellipse(a, b)
    t = np.linspace(0.0, ellipse.period, int(n_samples), endpoint=False)
    worst = 0.0
    for sign in (+1, -1):
        pts = parallel_point(ellipse, t, sign, r)
        worst = max(worst, float(np.max(np.abs(f.eval(pts)) / residual_scale(f, pts))))
    return worst


def certify_singular(f, points):
    """Scaled residuals ``max(|f|, |f_x|, |f_y|) / scale`` at complex points."""
    P = np.asarray(points, dtype=complex).reshape(-1, 2)
    fx, fy = f.dx(), f.dy()
    vals = np.stack([np.abs(g(P[:, 0], P[:, 1])) for g in (f, fx, fy)])
    return np.max(vals, axis=0) / residual_scale(f, P)


def closed_form_singular_points(a, b, r):
    """The four points ``(0, +-y0)`` and ``(+-x0, 0)`` with principal square roots."""
    y0 = cmath.sqrt(b * b - a * a) * cmath.sqrt(a * a - r * r) / a
    x0 = cmath.sqrt(a * a - b * b) * cmath.sqrt(b * b - r * r) / b
    return np.array([[0, y0], [0, -y0], [x0, 0], [-x0, 0]], dtype=complex)


def ellipse_offset_singular_points(a, b, r, f=None):
    """Certified complex singular points of the ellipse offsets (regime ``r > a^2/b``)."""
    if a == b:
        raise CertificationFailed("circle has smooth offsets: the singular point formulas collapse to (0, 0)")
    if not r > a * a / b:
        raise OutsideRegime(f"singular points are certified only for r > a^2/b = {a * a / b:.17g}, got r={r}")
    if f is None:
        f = ellipse_offset_poly(a, b, r)
    pts = closed_form_singular_points(a, b, r)
    res = certify_singular(f, pts)
    if not np.all(res < CERTIFY_TOL):
        raise CertificationFailed(f"singular point residual {float(np.max(res)):.3e} exceeds {CERTIFY_TOL}")
    return pts


def singular_search(f, n_starts=2000, seed=0, box=10.0, n_iter=100):
    """Heuristic multistart Newton search for singular points of ``f = 0`` in C^2.

    Seeds are uniform in ``[-box, box]`` for both real and imaginary parts. Newton
    runs on ``f_x = f_y = 0``; solutions with ``|f| < 1e-8 * scale`` (and at the
    rounding level of the evaluation) are kept, together with their conjugates
    for real ``f``, and deduplicated. Not guaranteed to find every singular point.
    """
    if f.degree < 2:
        return []
    rng = make_rng(seed)
    z = rng.uniform(-box, box, size=(int(n_starts), 2)) + 1j * rng.uniform(-box, box, size=(int(n_starts), 2))
    fx, fy = f.dx(), f.dy()
    fxx, fxy, fyy = fx.dx(), fx.dy(), fy.dy()
    last = np.full(len(z), np.inf)
    for _ in range(int(n_iter)):
        X, Y = z[:, 0], z[:, 1]
        gx, gy = fx(X, Y), fy(X, Y)
        hxx, hxy, hyy = fxx(X, Y), fxy(X, Y), fyy(X, Y)
        det = hxx * hyy - hxy * hxy
        ok = np.isfinite(det) & (np.abs(det) > 0)
        safe = np.where(ok, det, 1.0)
        dx = np.where(ok, (hyy * gx - hxy * gy) / safe, 0.0)
        dy = np.where(ok, (hxx * gy - hxy * gx) / safe, 0.0)
        z = z - np.stack([dx, dy], axis=1)
        last = np.hypot(np.abs(dx), np.abs(dy))
        # park diverging seeds so they do not overflow
        bad = ~np.all(np.isfinite(z), axis=1)
        z[bad] = 0.0
        last[bad] = np.inf
        if np.all(last <= 1e-15 * np.maximum(1.0, np.abs(z).max(axis=1))):
            break
    if not np.iscomplexobj(f.c):
        # conjugates of singular points of a real curve are singular too
        z = np.concatenate([z, np.conj(z)])
        last = np.concatenate([last, last])
    value = np.abs(f(z[:, 0], z[:, 1]))
    on_curve = value < ON_CURVE_TOL * residual_scale(f, z)
    # near-misses pass the coarse scale; demand a root at the rounding level too
    on_curve &= value <= ROUNDING_TOL * term_scale(f, z)
    keep = on_curve & (certify_singular(f, z) < ON_CURVE_TOL)
    cand, err = z[keep], last[keep]
    order = np.argsort(certify_singular(f, cand)) if len(cand) else []
    out, radius = [], []
    for k in order:
        p = cand[k]
        size = max(1.0, float(np.linalg.norm(p)))
        # degenerate singular points converge only linearly, so widen by the last step
        rad = max(DEDUP_RADIUS * size, 10.0 * float(err[k]))
        if all(np.linalg.norm(p - q) > max(rad, rq) for q, rq in zip(out, radius)):
            out.append(p)
            radius.append(rad)
    out.sort(key=lambda p: tuple(round(v, 9) for v in (p[0].real, p[0].imag, p[1].real, p[1].imag)))
    return [(complex(p[0]), complex(p[1])) for p in out]


def term_scale(f, points):
    """``sum |c_ij| max(1,|x|)^i max(1,|y|)^j``: size of the terms summed when evaluating ``f``."""
    p = np.asarray(points)
    return BivarPoly(np.abs(f.c))(np.maximum(1.0, np.abs(p[..., 0])), np.maximum(1.0, np.abs(p[..., 1])))


def implicit_curvature(f, p):
    """Signed curvature ``H(f) / |grad f|^3`` of the curve ``f = 0`` at the real point ``p``."""
    x, y = float(p[0]), float(p[1])
    if abs(f(x, y)) >= ON_CURVE_TOL * float(residual_scale(f, np.array([x, y]))):
        raise NotOnCurve(f"point ({x:.17g}, {y:.17g}) is not on the curve")
    fx, fy = f.dx(), f.dy()
    gx, gy = float(fx(x, y)), float(fy(x, y))
    g = math.hypot(gx, gy)
    if g < GRADIENT_GUARD:
        raise VanishingGradient(f"gradient vanishes at ({x:.17g}, {y:.17g})")
    H = fx.dx()(x, y) * gy * gy - 2.0 * fx.dy()(x, y) * gx * gy + fy.dy()(x, y) * gx * gx
    return float(H) / g**3


class InfinityPoint(NamedTuple):
    """Point ``(u : 1 : 0)`` with ``u = x/y`` (``u = inf`` stands for ``(1 : 0 : 0)``)."""

    ratio: complex
    multiplicity: int
    isotropic: bool
    tangency: bool

    @property
    def obstruction(self):
        # smooth transversal intersection away from the isotropic points
        return self.multiplicity == 1 and not self.isotropic

    def to_dict(self):
        ratio = None if cmath.isinf(self.ratio) else [self.ratio.real, self.ratio.imag]
        return {
            "ratio": ratio,
            "multiplicity": self.multiplicity,
            "isotropic": self.isotropic,
            "tangency": self.tangency,
        }


def _deflate_isotropic(q):
    """Strip exact factors ``u^2 + 1`` from ``q``; returns (quotient, count)."""
    coeffs = q.coeffs
    count = 0
    while coeffs.size >= 3:
        quo, rem = poly_divmod(coeffs, [1.0, 0.0, 1.0])
        if np.max(np.abs(rem)) > 1e-10 * np.max(np.abs(coeffs)):
            break
        coeffs = quo
        count += 1
    return UniPoly(coeffs), count


def infinity_report(f):
    """Points of the projective closure of ``f = 0`` on the line at infinity."""
    d = f.degree
    if d < 1:
        return []
    q = ratio_form(f, d)
    lower = ratio_form(f, d - 1)
    scale = f.scale()
    out = []

    def tangency(u, m):
        if m < 2:
            return False
        if cmath.isinf(u):
            value, size = abs(f.coeff(d - 1, 0)), scale
        else:
            value, size = abs(lower(u)), scale * max(1.0, abs(u)) ** (d - 1)
        return bool(value > TANGENCY_TOL * size)

    drop = d - max(q.degree, 0)
    if drop > 0:
        out.append(InfinityPoint(complex(math.inf, 0.0), drop, False, tangency(complex(math.inf, 0.0), drop)))
    rest, n_iso = _deflate_isotropic(q)
    found = {1j: n_iso, -1j: n_iso}
    others = []
    if rest.degree >= 1:
        for u, m in root_clusters(uni_roots(rest), radius=DEDUP_RADIUS):
            iso = min((1j, -1j), key=lambda w: abs(u - w))
            if abs(u - iso) < ISOTROPIC_TOL:
                found[iso] += m
            else:
                others.append((u, m))
    for iso in (-1j, 1j):
        if found[iso]:
            out.append(InfinityPoint(iso, found[iso], True, tangency(iso, found[iso])))
    for u, m in others:
        out.append(InfinityPoint(complex(u), int(m), False, tangency(u, m)))
    return out


@dataclass
class ObstructionReport:
    affine_singular_points: list
    infinity_points: list
    verdict: str
    residuals: list = field(default_factory=list)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "affine_singular": [[p[0].real, p[0].imag, p[1].real, p[1].imag] for p in self.affine_singular_points],
            "infinity": [pt.to_dict() for pt in self.infinity_points],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def obstruction_report(f, n_starts=2000, seed=0, closed_form=None, box=10.0):
    """Combine the singular point search, optional closed-form points and the infinity analysis.

    ``closed_form`` is an optional array of candidate singular points (e.g. from
    ``closed_form_singular_points``); only those passing certification count.
    """
    points = singular_search(f, n_starts=n_starts, seed=seed, box=box) if f.degree >= 2 else []
    if closed_form is not None:
        cand = np.asarray(closed_form, dtype=complex).reshape(-1, 2)
        res = certify_singular(f, cand)
        for p in cand[res < CERTIFY_TOL]:
            if all(np.linalg.norm(p - np.array(q)) > DEDUP_RADIUS * max(1.0, np.linalg.norm(p)) for q in points):
                points.append((complex(p[0]), complex(p[1])))
    residuals = certify_singular(f, points).tolist() if points else []
    inf_pts = infinity_report(f)
    if points:
        verdict = "obstructed_affine_singularity"
    elif any(pt.obstruction for pt in inf_pts):
        verdict = "obstructed_transversal_infinity"
    else:
        verdict = "no_obstruction"
    return ObstructionReport(points, inf_pts, verdict, residuals)


class ScanEntry(NamedTuple):
    r: float
    in_regime: bool
    certified: bool
    max_residual: float
    points: np.ndarray


def r_scan(a, b, r_values):
    """Certify the closed-form singular points for each ``r``; failures are recorded, not raised."""
    out = []
    for r in r_values:
        r = float(r)
        in_regime = a != b and r > a * a / b
        pts = closed_form_singular_points(a, b, r)
        res = float(np.max(certify_singular(ellipse_offset_poly(a, b, r), pts)))
        out.append(ScanEntry(r, in_regime, in_regime and res < CERTIFY_TOL, res, pts))
    return out


def scan_to_dict(entries):
    return [
        {
            "r": e.r,
            "in_regime": e.in_regime,
            "certified": e.certified,
            "max_residual": e.max_residual,
            "points": [[p[0].real, p[0].imag, p[1].real, p[1].imag] for p in e.points],
        }
        for e in entries
    ]
