"""Polynomial integrals of magnetic billiards and the identities they force.

An integral is a polynomial ``Phi(x, v)`` in the velocity with polynomial
coefficients in the position. Along Larmor arcs it can only depend on the
center, ``Phi(x, v) = F(x + r J v)``, and then ``F`` must be invariant under the
center map. Near grazing impacts this forces ``F`` to be constant on the
parallel curves and ``H(F) + beta |grad F|^3`` to be constant there too.
"""

import json
import math
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np
import scipy.linalg

from .dynamics import OK, center_map_batch
from .errors import VanishingGradient
from .geom import MagneticParams, make_rng, norm, parallel_point, rotate90, sample_phase_space
from .poly import BivarPoly, Jet, TrigPoly, second_order_form, third_order_form

GRADIENT_GUARD = 1e-10


class VelocityPoly:
    """``Phi = sum a_kl(x) v1**k v2**l`` with BivarPoly coefficients ``a_kl``."""

    def __init__(self, coeffs=None):
        self.coeffs = {}
        for (k, l), a in (coeffs or {}).items():
            a = a if isinstance(a, BivarPoly) else BivarPoly.const(a)
            if not a.is_zero():
                key = (int(k), int(l))
                self.coeffs[key] = self.coeffs[key] + a if key in self.coeffs else a

    @property
    def degree(self):
        """Total velocity degree ``N``."""
        return max((k + l for k, l in self.coeffs), default=0)

    def __call__(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        total = np.zeros(np.broadcast_shapes(x.shape[:-1], v.shape[:-1]))
        for (k, l), a in self.coeffs.items():
            total = total + a.eval(x) * v[..., 0] ** k * v[..., 1] ** l
        return total

    def __add__(self, other):
        out = dict(self.coeffs)
        for key, a in other.coeffs.items():
            out[key] = out[key] + a if key in out else a
        return VelocityPoly(out)

    def __repr__(self):
        return f"VelocityPoly(N={self.degree}, terms={sorted(self.coeffs)})"

    def velocity_fourier(self, x, K=None):
        """Fourier coefficients in ``theta`` of ``Phi(x, (cos theta, sin theta))`` at one point."""
        K = self.degree if K is None else K
        m = 4 * K + 4
        th = np.arange(m) * (2 * math.pi / m)
        v = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return TrigPoly.from_samples(self(np.broadcast_to(np.asarray(x, float), v.shape), v), K)


def velocity_difference(phi1, phi2, points):
    """Max difference of two velocity polynomials on unit velocities, via Fourier coefficients.

    ``v1**2 + v2**2 = 1`` makes coefficient lists non-unique, so the comparison
    is between the trigonometric polynomials in the velocity angle.
    """
    K = max(phi1.degree, phi2.degree)
    worst = 0.0
    for x in np.asarray(points, dtype=float).reshape(-1, 2):
        a = phi1.velocity_fourier(x, K)
        b = phi2.velocity_fourier(x, K)
        worst = max(worst, float(np.max(np.abs(a.A - b.A))), float(np.max(np.abs(a.B - b.B))))
    return worst


def circle_integral(beta):
    """``h = x1^2 + x2^2 + (2/beta)(v1 x2 - v2 x1)``: squared center distance minus ``r^2``."""
    X, Y = BivarPoly.x(), BivarPoly.y()
    return VelocityPoly({(0, 0): X**2 + Y**2, (1, 0): (2.0 / beta) * Y, (0, 1): (-2.0 / beta) * X})


def phi_from_F(F, r):
    """Expand ``F(x1 - r v2, x2 + r v1)`` as a polynomial in the velocity.

    The term ``c_ij x^i y^j`` contributes ``C(i,a) C(j,b) (-r)^a r^b x^(i-a) y^(j-b)``
    to the coefficient of ``v1^b v2^a``.
    """
    out = {}
    for i, j, c in F.terms():
        for a in range(i + 1):
            for b in range(j + 1):
                coef = c * comb(i, a) * comb(j, b) * (-r) ** a * r**b
                term = BivarPoly.from_terms([(i - a, j - b, coef)])
                key = (b, a)
                out[key] = out[key] + term if key in out else term
    return VelocityPoly(out)


@dataclass
class FitResult:
    F: Optional[BivarPoly]
    residual: float
    relative_residual: float
    rank: int
    dimension: int
    null_direction: Optional[BivarPoly] = None


def _monomials(deg):
    return [(i, s - i) for s in range(deg + 1) for i in range(s, -1, -1)]


def F_from_phi(phi, r, region=((-1.0, -1.0), (1.0, 1.0)), degree=None, n_samples=None, seed=0):
    """Least-squares ``F`` of degree ``<= 2N`` with ``F(x + r J v) = Phi(x, v)``.

    Positions are drawn uniformly from the box ``region`` and velocities from the
    unit circle. The fit runs in coordinates scaled to the box of the resulting
    centers (pivoted QR), then is mapped back. A small residual certifies that
    ``Phi`` only depends on the Larmor center; rank deficiency is reported
    through ``null_direction`` (a polynomial vanishing on every sampled center).
    """
    deg = 2 * phi.degree if degree is None else int(degree)
    mons = _monomials(deg)
    dim = len(mons)
    n = max(10 * dim, 50) if n_samples is None else int(n_samples)
    rng = make_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in region)
    x = rng.uniform(lo, hi, size=(n, 2))
    th = rng.uniform(0.0, 2 * math.pi, size=n)
    v = np.stack([np.cos(th), np.sin(th)], axis=1)
    target = phi(x, v)
    centers = x + r * rotate90(v)
    c_lo = lo - r
    c_hi = hi + r
    mid = 0.5 * (c_lo + c_hi)
    half = 0.5 * (c_hi - c_lo)
    u = (centers - mid) / half
    A = np.stack([u[:, 0] ** i * u[:, 1] ** j for i, j in mons], axis=1)
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * diag[0])) if diag.size else 0
    X, Y = BivarPoly.x(), BivarPoly.y()
    to_orig = lambda coef: BivarPoly.from_terms(  # noqa: E731
        [(i, j, c) for (i, j), c in zip(mons, coef)]
    ).substitute((X - mid[0]) / half[0], (Y - mid[1]) / half[1])
    scale = max(1.0, float(np.max(np.abs(target))) if target.size else 1.0)
    if rank < dim:
        _, _, vt = np.linalg.svd(A, full_matrices=False)
        return FitResult(None, math.inf, math.inf, rank, dim, to_orig(vt[-1]))
    coef = np.zeros(dim)
    coef[piv] = scipy.linalg.solve_triangular(R, Q.T @ target)
    F = to_orig(coef)
    resid = float(np.max(np.abs(F.eval(centers) - target))) if n else 0.0
    return FitResult(F, resid, resid / scale, rank, dim)


# -- dynamical checks ------------------------------------------------------------------------


def _radius(params):
    return params.r if isinstance(params, MagneticParams) else float(params)


def invariance_residual(F, boundary, params, n_samples, seed=0, margin=1e-3):
    """``max |F(M(P)) - F(P)|`` over random centers (degenerate samples are redrawn)."""
    values = invariance_values(F, boundary, params, n_samples, seed, margin)
    return float(np.max(values)) if values.size else 0.0


def invariance_values(F, boundary, params, n_samples, seed=0, margin=1e-3):
    r = _radius(params)
    rng = make_rng(seed)
    out = []
    remaining = int(n_samples)
    for _ in range(100):
        if remaining <= 0:
            break
        P = sample_phase_space(boundary, r, remaining, rng, margin=margin)
        res = center_map_batch(P, boundary, r)
        good = res.status == OK
        out.append(np.abs(np.real(F.eval(res.centers[good]) - F.eval(P[good]))))
        remaining -= int(good.sum())
    return np.concatenate(out)[: int(n_samples)] if out else np.empty(0)


def integral_residuals(phi, boundary, params, n_samples, seed=0, margin=1e-3):
    """Per-sample spread of ``Phi`` over one flight and the reflection that ends it.

    For each random center the values at the entry state, the mid-arc state,
    the exit state and the reflected exit state must coincide for an integral.
    """
    r = _radius(params)
    rng = make_rng(seed)
    out = []
    remaining = int(n_samples)
    for _ in range(100):
        if remaining <= 0:
            break
        P = sample_phase_space(boundary, r, remaining, rng, margin=margin)
        res = center_map_batch(P, boundary, r)
        g = res.status == OK
        P, res_q, t_in = P[g], res.impact[g], res.t_entry[g]
        entry = boundary.eval(t_in)
        a0 = np.arctan2(entry[:, 1] - P[:, 1], entry[:, 0] - P[:, 0])
        a1 = np.arctan2(res_q[:, 1] - P[:, 1], res_q[:, 0] - P[:, 0])
        sweep = np.mod(a1 - a0, 2 * math.pi)
        am = a0 + 0.5 * sweep
        mid = P + r * np.stack([np.cos(am), np.sin(am)], axis=1)
        vals = np.stack([
            phi(entry, rotate90(entry - P) / r),
            phi(mid, rotate90(mid - P) / r),
            phi(res_q, res.v_in[g]),
            phi(res_q, res.v_out[g]),
        ])
        out.append(np.max(vals, axis=0) - np.min(vals, axis=0))
        remaining -= int(g.sum())
    return np.concatenate(out)[: int(n_samples)] if out else np.empty(0)


def boundary_constancy(F, boundary, params, side, n_samples=1024):
    """Mean and max deviation of ``F`` along the parallel curve on ``side``."""
    r = _radius(params)
    t = np.arange(int(n_samples)) * (boundary.period / int(n_samples))
    values = np.real(F.eval(parallel_point(boundary, t, side, r)))
    mean = float(np.mean(values))
    return mean, float(np.max(np.abs(values - mean)))


def normalize_integral(F, c1, c2):
    """``F^2 - (c1 + c2) F + c1 c2``: vanishes where ``F`` equals ``c1`` or ``c2``."""
    return F * F - (c1 + c2) * F + c1 * c2


# -- grazing construction ------------------------------------------------------------------------


def _rot(w, angle):
    c, s = math.cos(angle), math.sin(angle)
    w = np.asarray(w, dtype=float)
    return np.stack([c * w[..., 0] - s * w[..., 1], s * w[..., 0] + c * w[..., 1]], axis=-1)


def grazing_centers(boundary, params, t, eps, case):
    """Centers ``(P-, P+)`` of the Larmor circles before and after a near-grazing impact at ``gamma(t)``.

    Case 'a' (inner parallel): ``P-/+ = Q + r J R_(-/+eps) tau``.
    Case 'b' (outer parallel): ``P-/+ = Q - r J R_(+/-eps) tau``.
    """
    r = _radius(params)
    Q = boundary.eval(t)
    tau = boundary.tangent(t)
    if case == "a":
        return Q + r * rotate90(_rot(tau, -eps)), Q + r * rotate90(_rot(tau, eps))
    if case == "b":
        return Q - r * rotate90(_rot(tau, eps)), Q - r * rotate90(_rot(tau, -eps))
    raise ValueError(f"case must be 'a' or 'b', got {case!r}")


def arc_midpoint_defect(Q, p_minus, p_plus, p_mid, r):
    """Distance from ``p_mid`` to the midpoint of the short arc from ``p_minus`` to ``p_plus`` about ``Q``."""
    chord_mid = 0.5 * (np.asarray(p_minus) + np.asarray(p_plus)) - Q
    arc_mid = Q + r * chord_mid / norm(chord_mid)
    return float(norm(arc_mid - p_mid))


# -- remarkable equation ------------------------------------------------------------------------------


def _curvature_term(F, points, beta):
    jet = Jet.of(F, np.asarray(points, dtype=float))
    g = jet.grad_norm
    if np.any(g < GRADIENT_GUARD):
        raise VanishingGradient(f"|grad F| = {np.min(g):.3g} on the curve")
    return jet.H + beta * g**3


def rem3_residual(F, points, beta):
    """Mean and max deviation of ``H(F) + beta |grad F|^3`` along sampled curve points."""
    values = _curvature_term(F, points, beta)
    mean = float(np.mean(values))
    return mean, float(np.max(np.abs(values - mean)))


def rem5_residual(f, g, k, beta, points, rel_tol=1e-8):
    """``g^3 (H(f) + beta |grad f|^3)^k`` along the curve: mean, max deviation, non-zero flag."""
    points = np.asarray(points, dtype=float)
    values = np.real(g.eval(points)) ** 3 * _curvature_term(f, points, beta) ** int(k)
    mean = float(np.mean(values))
    dev = float(np.max(np.abs(values - mean)))
    nonzero = abs(mean) > rel_tol * max(1.0, float(np.max(np.abs(values))))
    return mean, dev, bool(nonzero)


def parallel_samples(boundary, params, side, n_samples=1024):
    t = np.arange(int(n_samples)) * (boundary.period / int(n_samples))
    return parallel_point(boundary, t, side, _radius(params))


def grazing_difference(F, P0, n, r, eps):
    """``F(P0 + r(I - R_eps) n) - F(P0 + r(I - R_-eps) n)`` for a unit vector ``n``."""
    P0 = np.asarray(P0, dtype=float)
    n = np.asarray(n, dtype=float)
    plus = P0 + r * (n - _rot(n, eps))
    minus = P0 + r * (n - _rot(n, -eps))
    return float(np.real(F.eval(plus) - F.eval(minus)))


def expected_cubic_coefficient(F, P0, beta, r):
    """``r^3 / (3 |grad F|^3)`` times the closed-form derivative along ``(F_y, -F_x)``, with a size scale.

    The scale sums the absolute values of the individual products so that
    exact cancellation (e.g. for radial ``F``) can be told from a genuine value.
    """
    jet = Jet.of(F, np.asarray(P0, dtype=float))
    fx, fy = float(jet.x), float(jet.y)
    g = math.hypot(fx, fy)
    if g < GRADIENT_GUARD:
        raise VanishingGradient(f"|grad F| = {g:.3g} at {P0}")
    third = float(third_order_form(jet))
    second = float(second_order_form(jet))
    value = r**3 / (3 * g**3) * (third + 3 * beta * g * second)
    third_size = (abs(jet.xxx * fy**3) + 3 * abs(jet.xxy * fy**2 * fx) + 3 * abs(jet.xyy * fy * fx**2)
                  + abs(jet.yyy * fx**3))
    second_size = abs(jet.xx * fx * fy) + abs(jet.xy * (fy**2 - fx**2)) + abs(jet.yy * fx * fy)
    size = r**3 / (3 * g**3) * (float(third_size) + 3 * beta * g * float(second_size))
    return value, size


def richardson_zero(eps, values):
    """Extrapolate ``g(eps) = c0 + c1 eps^2 + c2 eps^4 + ...`` to ``eps = 0`` (Neville in ``eps^2``)."""
    h = np.asarray(eps, dtype=float) ** 2
    table = list(np.asarray(values, dtype=float))
    n = len(table)
    for level in range(1, n):
        for i in range(n - level):
            j = i + level
            table[i] = (h[j] * table[i] - h[i] * table[i + 1]) / (h[j] - h[i])
    return float(table[0])


def rem1_eps_check(F, boundary, params, t, case="a", eps_ladder=(1e-2, 5e-3, 2.5e-3), P0=None):
    """Ratio of the extrapolated cubic coefficient of the grazing difference to its closed form.

    ``P0`` defaults to the parallel point at ``t`` (inner for case 'a', outer for
    case 'b'). Returns ``None`` when the closed form vanishes by cancellation
    (the check carries no information there).
    """
    r = _radius(params)
    beta = 1.0 / r
    if P0 is None:
        P0 = parallel_point(boundary, t, "+" if case == "a" else "-", r)
    P0 = np.asarray(P0, dtype=float)
    expected, size = expected_cubic_coefficient(F, P0, beta, r)
    if size == 0.0 or abs(expected) <= 1e-9 * size:
        return None
    grad = F.gradient(P0).real
    n = grad / norm(grad)
    g = [grazing_difference(F, P0, n, r, e) / e**3 for e in eps_ladder]
    return richardson_zero(eps_ladder, g) / expected


# -- text formats and reports --------------------------------------------------------------------------


def parse_velocity_poly(text):
    """Read ``k l i j coefficient`` lines (``v1^k v2^l x^i y^j``); ``#`` comments, duplicates summed."""
    terms = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 'k l i j coefficient', got {raw!r}")
        k, l, i, j = (int(p) for p in parts[:4])
        terms.setdefault((k, l), []).append((i, j, float(parts[4])))
    return VelocityPoly({key: BivarPoly.from_terms(v) for key, v in terms.items()})


def format_velocity_poly(phi):
    lines = []
    for (k, l) in sorted(phi.coeffs):
        for i, j, c in phi.coeffs[(k, l)].terms():
            lines.append(f"{k} {l} {i} {j} {float(np.real(c)):.17g}\n")
    return "".join(lines)


def read_velocity_poly(path):
    with open(path) as fh:
        return parse_velocity_poly(fh.read())


@dataclass
class CheckReport:
    check: str
    samples: int
    mean: float
    max_abs_residual: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.max_abs_residual < self.tolerance)

    def to_dict(self):
        return {
            "check": self.check,
            "samples": int(self.samples),
            "mean": float(self.mean),
            "max_abs_residual": float(self.max_abs_residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)
