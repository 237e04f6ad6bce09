"""Bivariate polynomials, univariate complex root finding and Fourier restriction.

``BivarPoly`` stores a dense coefficient grid ``c[i, j]`` for ``x**i * y**j``.
Coefficients are real in every construction used by the package, but complex
grids are accepted so that intermediate results (e.g. shifts by complex points)
stay exact.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NoRoots

MAX_DEGREE = 64


class BivarPoly:
    """Polynomial in ``x`` and ``y`` with dense coefficients ``c[i, j]``."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = np.atleast_2d(np.asarray(coeffs))
        if not np.iscomplexobj(c):
            c = c.astype(float)
        n = max(c.shape)
        grid = np.zeros((n, n), dtype=c.dtype)
        grid[: c.shape[0], : c.shape[1]] = c
        self.c = _trim(grid)
        if self.degree > MAX_DEGREE:
            raise ValueError(f"degree {self.degree} exceeds the supported maximum {MAX_DEGREE}")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_terms(cls, terms):
        """From ``{(i, j): coeff}`` or an iterable of ``(i, j, coeff)``; duplicates add up."""
        if isinstance(terms, dict):
            items = [(int(i), int(j), v) for (i, j), v in terms.items()]
        else:
            items = [(int(i), int(j), v) for i, j, v in terms]
        n = 1 + max((i + j for i, j, _ in items), default=0)
        dtype = complex if any(isinstance(v, complex) for _, _, v in items) else float
        grid = np.zeros((n, n), dtype=dtype)
        for i, j, v in items:
            if i < 0 or j < 0:
                raise ValueError("exponents must be non-negative")
            grid[i, j] += v
        return cls(grid)

    @classmethod
    def const(cls, value):
        return cls([[value]])

    @classmethod
    def x(cls):
        return cls([[0.0], [1.0]])

    @classmethod
    def y(cls):
        return cls([[0.0, 1.0]])

    @classmethod
    def zero(cls):
        return cls([[0.0]])

    # -- basic properties ---------------------------------------------------------

    @property
    def degree(self):
        """Largest ``i + j`` with a non-zero coefficient (-1 for the zero polynomial)."""
        i, j = np.nonzero(self.c)
        return int(np.max(i + j)) if i.size else -1

    def is_zero(self):
        return not np.any(self.c)

    def terms(self):
        """Non-zero terms as ``(i, j, coeff)`` in lexicographic order."""
        i, j = np.nonzero(self.c)
        return [(int(a), int(b), self.c[a, b]) for a, b in zip(i, j)]

    def coeff(self, i, j):
        if i < self.c.shape[0] and j < self.c.shape[1]:
            return self.c[i, j]
        return 0.0

    def scale(self):
        """Largest absolute coefficient (at least tiny so that ratios stay finite)."""
        return float(np.max(np.abs(self.c))) if self.c.size else 0.0

    def real(self):
        return BivarPoly(np.real(self.c))

    def __repr__(self):
        return f"BivarPoly({format_terms(self)})"

    # -- evaluation -----------------------------------------------------------------

    def __call__(self, x, y):
        """Evaluate at real or complex coordinates (broadcasting)."""
        x = np.asarray(x)
        y = np.asarray(y)
        if np.iscomplexobj(x) or np.iscomplexobj(y):
            x = x.astype(complex)
            y = y.astype(complex)
        return npoly.polyval2d(x, y, self.c)

    def eval(self, p):
        """Evaluate at points ``p`` with a trailing axis of length 2."""
        p = np.asarray(p)
        return self(p[..., 0], p[..., 1])

    # -- arithmetic --------------------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        n = max(self.c.shape[0], other.c.shape[0])
        out = np.zeros((n, n), dtype=np.result_type(self.c, other.c))
        out[: self.c.shape[0], : self.c.shape[1]] += self.c
        out[: other.c.shape[0], : other.c.shape[1]] += other.c
        return BivarPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return BivarPoly(-self.c)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return BivarPoly(self.c * other)
        other = _coerce(other)
        da, db = self.degree, other.degree
        if da < 0 or db < 0:
            return BivarPoly.zero()
        a = self.c[: da + 1, : da + 1]
        b = other.c[: db + 1, : db + 1]
        out = np.zeros((da + db + 1, da + db + 1), dtype=np.result_type(a, b))
        for i in range(a.shape[0]):
            row = a[i]
            if not np.any(row):
                continue
            for k in range(b.shape[0]):
                if np.any(b[k]):
                    out[i + k, : a.shape[1] + b.shape[1] - 1] += np.convolve(row, b[k])
        return BivarPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return BivarPoly(self.c / scalar)

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = BivarPoly.const(1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, BivarPoly):
            return NotImplemented
        n = max(self.c.shape[0], other.c.shape[0])
        return np.array_equal(_pad(self.c, n), _pad(other.c, n))

    def __hash__(self):
        return hash(tuple(self.terms()))

    def allclose(self, other, rtol=1e-12, atol=1e-12):
        other = _coerce(other)
        n = max(self.c.shape[0], other.c.shape[0])
        return np.allclose(_pad(self.c, n), _pad(other.c, n), rtol=rtol, atol=atol)

    # -- calculus and structure ------------------------------------------------------------

    def derivative(self, axis):
        """Partial derivative along ``axis`` (0 or 'x' for x, 1 or 'y' for y)."""
        ax = {"x": 0, "y": 1}.get(axis, axis)
        if self.c.shape[ax] <= 1:
            return BivarPoly.zero()
        return BivarPoly(npoly.polyder(self.c, axis=ax))

    def dx(self):
        return self.derivative(0)

    def dy(self):
        return self.derivative(1)

    def gradient(self, p):
        """``(F_x, F_y)`` at points ``p``."""
        p = np.asarray(p)
        return np.stack([self.dx().eval(p), self.dy().eval(p)], axis=-1)

    def homogeneous_part(self, j):
        """Sum of the terms of total degree ``j``."""
        out = np.zeros_like(self.c)
        for i in range(max(0, j - self.c.shape[1] + 1), min(j, self.c.shape[0] - 1) + 1):
            out[i, j - i] = self.c[i, j - i]
        return BivarPoly(out)

    def homogeneous_parts(self):
        return [self.homogeneous_part(j) for j in range(self.degree + 1)]

    def leading_form(self):
        """Top-degree part as a univariate polynomial in the ratio ``u = x/y``.

        ``f_d(x, y) = y**d * q(u)``; the coefficient of ``u**i`` is ``c[i, d-i]``.
        A drop of degree of ``q`` below ``d`` means the root ``y = 0`` (point
        ``(1:0:0)``) with multiplicity ``d - deg q``.
        """
        return ratio_form(self, self.degree)

    def substitute(self, px, py):
        """Composition ``F(px, py)`` with polynomial arguments."""
        px, py = _coerce(px), _coerce(py)
        out = BivarPoly.zero()
        d = self.degree
        if d < 0:
            return out
        xpow = [BivarPoly.const(1.0)]
        ypow = [BivarPoly.const(1.0)]
        for _ in range(d):
            xpow.append(xpow[-1] * px)
            ypow.append(ypow[-1] * py)
        for i, j, v in self.terms():
            out = out + (xpow[i] * ypow[j]) * v
        return out

    def shift(self, cx, cy):
        """``F(x + cx, y + cy)``."""
        return self.substitute(BivarPoly.x() + cx, BivarPoly.y() + cy)


def ratio_form(F, j):
    """Homogeneous part of degree ``j`` restricted to ``y = 1`` as a UniPoly in ``x/y``."""
    coeffs = [F.coeff(i, j - i) for i in range(j + 1)]
    return UniPoly(coeffs)


def _trim(grid):
    nz = np.nonzero(grid)
    if not nz[0].size:
        return np.zeros((1, 1), dtype=grid.dtype)
    n = int(max(nz[0].max(), nz[1].max())) + 1
    return grid[:n, :n].copy()


def _pad(c, n):
    out = np.zeros((n, n), dtype=c.dtype)
    out[: c.shape[0], : c.shape[1]] = c
    return out


def _coerce(value):
    if isinstance(value, BivarPoly):
        return value
    return BivarPoly.const(value)


def H_operator(F):
    """``F_xx F_y^2 - 2 F_xy F_x F_y + F_yy F_x^2`` (curvature numerator of the level sets)."""
    fx, fy = F.dx(), F.dy()
    fxx, fxy, fyy = fx.dx(), fx.dy(), fy.dy()
    return fxx * fy**2 - 2 * fxy * fx * fy + fyy * fx**2


# -- derivative jets ---------------------------------------------------------------------


@dataclass
class Jet:
    """All partial derivatives up to order three at a set of points."""

    f: np.ndarray
    x: np.ndarray
    y: np.ndarray
    xx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray
    xxx: np.ndarray
    xxy: np.ndarray
    xyy: np.ndarray
    yyy: np.ndarray

    @classmethod
    def of(cls, F, p):
        p = np.asarray(p)
        fx, fy = F.dx(), F.dy()
        fxx, fxy, fyy = fx.dx(), fx.dy(), fy.dy()
        ev = lambda G: G.eval(p)  # noqa: E731
        return cls(ev(F), ev(fx), ev(fy), ev(fxx), ev(fxy), ev(fyy),
                   ev(fxx.dx()), ev(fxx.dy()), ev(fxy.dy()), ev(fyy.dy()))

    @property
    def grad_norm(self):
        return np.hypot(self.x, self.y)

    @property
    def H(self):
        return self.xx * self.y**2 - 2 * self.xy * self.x * self.y + self.yy * self.x**2


def third_order_form(jet):
    """``F_xxx F_y^3 - 3 F_xxy F_y^2 F_x + 3 F_xyy F_y F_x^2 - F_yyy F_x^3``."""
    fx, fy = jet.x, jet.y
    return jet.xxx * fy**3 - 3 * jet.xxy * fy**2 * fx + 3 * jet.xyy * fy * fx**2 - jet.yyy * fx**3


def second_order_form(jet):
    """``F_xx F_x F_y + F_xy (F_y^2 - F_x^2) - F_yy F_x F_y``."""
    fx, fy = jet.x, jet.y
    return jet.xx * fx * fy + jet.xy * (fy**2 - fx**2) - jet.yy * fx * fy


def remarkable_rhs(F, p, beta):
    """Closed form of the derivative of ``H(F) + beta |grad F|^3`` along ``(F_y, -F_x)``."""
    jet = Jet.of(F, p)
    return third_order_form(jet) + 3 * beta * jet.grad_norm * second_order_form(jet)


def remarkable_lhs_derivative(F, p, beta):
    """Derivative of ``H(F) + beta |grad F|^3`` along ``(F_y, -F_x)`` from exact polynomial gradients."""
    p = np.asarray(p)
    jet = Jet.of(F, p)
    gH = H_operator(F).gradient(p)
    g = jet.grad_norm
    # grad |grad F|^3 = 3 |grad F| (F_x grad F_x + F_y grad F_y)
    gx = 3 * g * (jet.x * jet.xx + jet.y * jet.xy)
    gy = 3 * g * (jet.x * jet.xy + jet.y * jet.yy)
    return (gH[..., 0] + beta * gx) * jet.y - (gH[..., 1] + beta * gy) * jet.x


# -- univariate polynomials --------------------------------------------------------------


class UniPoly:
    """Complex univariate polynomial, coefficients in ascending order."""

    TRIM = 1e-13

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        big = np.max(np.abs(c))
        k = c.size
        while k > 1 and abs(c[k - 1]) <= self.TRIM * big:
            k -= 1
        self.coeffs = c[:k]

    @property
    def degree(self):
        if self.coeffs.size == 1 and self.coeffs[0] == 0:
            return -1
        return self.coeffs.size - 1

    def __call__(self, z):
        return npoly.polyval(np.asarray(z, dtype=complex), self.coeffs)

    def __repr__(self):
        return f"UniPoly({self.coeffs.tolist()})"

    def derivative(self):
        return UniPoly(npoly.polyder(self.coeffs)) if self.coeffs.size > 1 else UniPoly([0])

    def roots(self):
        return uni_roots(self)

    def residual_scale(self, z):
        """Coefficient scale used for residual tests at ``z``."""
        return float(np.max(np.abs(self.coeffs))) * max(1.0, abs(z)) ** max(self.degree, 0)


def uni_roots(p, max_iter=500, tol=1e-14):
    """All complex roots (repeated by multiplicity).

    Durand-Kerner simultaneous iteration; when it stalls or leaves residuals above
    ``1e-8`` times the coefficient scale, the companion-matrix eigenvalues are
    used instead (whichever set has the smaller worst residual wins).
    """
    if not isinstance(p, UniPoly):
        p = UniPoly(p)
    n = p.degree
    if n < 1:
        raise NoRoots("a constant polynomial has no roots")
    monic = p.coeffs / p.coeffs[-1]
    # Cauchy bound for the initial circle
    radius = 1.0 + float(np.max(np.abs(monic[:-1])))
    z = radius * (0.4 + 0.9j) ** np.arange(n)
    converged = False
    for _ in range(max_iter):
        num = npoly.polyval(z, monic)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        den = np.prod(diff, axis=1)
        if np.any(den == 0):
            break
        step = num / den
        z = z - step
        if np.max(np.abs(step)) <= tol * max(1.0, float(np.max(np.abs(z)))):
            converged = True
            break
    worst = _worst_residual(p, z)
    if not converged or worst > 1e-8:
        alt = np.roots(p.coeffs[::-1])
        if _worst_residual(p, alt) < worst:
            z = alt
    z = _snap_multiple_roots(p, np.asarray(z, dtype=complex))
    return sorted(z.tolist(), key=lambda w: (round(w.real, 9), round(w.imag, 9)))


def _snap_multiple_roots(p, z, spread=1e-3, tol=1e-12):
    """Collapse tight root groups onto one point when it is a root of that multiplicity.

    Simultaneous iteration only resolves an m-fold root to about eps**(1/m). The
    group mean, polished by Newton on the (m-1)-th derivative (which has a
    simple root there), is accepted when the Taylor coefficients of orders
    ``0..m-1`` at that point are negligible.
    """
    out = z.copy()
    for mean, members in _groups(z, spread):
        m = len(members)
        if m < 2:
            continue
        q = npoly.polyder(p.coeffs, m - 1)
        dq = npoly.polyder(q)
        mu = mean
        for _ in range(20):
            slope = npoly.polyval(mu, dq)
            if slope == 0:
                break
            step = npoly.polyval(mu, q) / slope
            mu -= step
            if abs(step) <= 1e-16 * max(1.0, abs(mu)):
                break
        if abs(mu - mean) > spread * max(1.0, abs(mean)):
            continue
        scale = p.residual_scale(mu)
        taylor = [abs(npoly.polyval(mu, npoly.polyder(p.coeffs, k))) / math.factorial(k) for k in range(m)]
        if max(taylor) <= tol * scale:
            out[members] = mu
    return out


def _groups(z, radius, relative=True):
    """Single-linkage groups of points closer than ``radius`` (times ``max(1, |z|)`` if relative)."""
    parent = list(range(len(z)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            if abs(z[i] - z[j]) < radius * (max(1.0, abs(z[i])) if relative else 1.0):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(len(z)):
        groups.setdefault(find(i), []).append(i)
    return [(complex(np.mean(z[idx])), idx) for idx in groups.values()]


def _worst_residual(p, z):
    z = np.asarray(z, dtype=complex)
    if z.size == 0 or not np.all(np.isfinite(z)):
        return math.inf
    return float(max(abs(p(w)) / p.residual_scale(w) for w in z))


def root_clusters(roots, radius=1e-6):
    """Group roots closer than ``radius`` (single linkage): ``[(mean, multiplicity), ...]``."""
    z = np.asarray([complex(w) for w in roots], dtype=complex)
    out = [(mean, len(idx)) for mean, idx in _groups(z, radius, relative=False)]
    return sorted(out, key=lambda t: (round(t[0].real, 9), round(t[0].imag, 9)))


def poly_divmod(num, den):
    """Division with remainder of ascending complex coefficient arrays."""
    q, r = npoly.polydiv(np.asarray(num, dtype=complex), np.asarray(den, dtype=complex))
    return q, r


# -- trigonometric polynomials --------------------------------------------------------------


@dataclass
class TrigPoly:
    """``A_0 + sum_k A_k cos(k t) + B_k sin(k t)`` for ``k = 1..K``."""

    A: np.ndarray
    B: np.ndarray

    @property
    def K(self):
        return len(self.A) - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(len(self.A))
        ang = t[..., None] * k
        return np.sum(self.A * np.cos(ang) + self.B * np.sin(ang), axis=-1)

    def amplitudes(self):
        return np.hypot(self.A, self.B)

    def degree(self, tol):
        """Highest harmonic whose amplitude exceeds ``tol`` (-1 when all vanish)."""
        big = np.nonzero(self.amplitudes() > tol)[0]
        return int(big[-1]) if big.size else -1

    @classmethod
    def from_samples(cls, values, K):
        """Fit from equispaced samples on ``[0, 2 pi)``; needs more than ``2K`` samples."""
        values = np.asarray(values, dtype=float)
        m = values.size
        if m <= 2 * K:
            raise ValueError(f"need more than {2 * K} samples for {K} harmonics, got {m}")
        c = np.fft.rfft(values) / m
        A = np.zeros(K + 1)
        B = np.zeros(K + 1)
        A[0] = c[0].real
        A[1:] = 2 * c[1 : K + 1].real
        B[1:] = -2 * c[1 : K + 1].imag
        if 2 * K == m:  # Nyquist term is not doubled
            A[K] /= 2
        return cls(A, B)


def fourier_restriction(F, center, r, K):
    """Fourier coefficients of ``t -> F(center + r (cos t, sin t))`` from ``4K + 4`` samples."""
    m = 4 * K + 4
    t = np.arange(m) * (2 * math.pi / m)
    cx, cy = center
    values = np.real(F(cx + r * np.cos(t), cy + r * np.sin(t)))
    return TrigPoly.from_samples(values, K)


# -- text format ----------------------------------------------------------------------------


def parse_poly(text):
    """Read ``i j coefficient`` lines; ``#`` starts a comment; duplicate terms add up."""
    terms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j coefficient', got {raw!r}")
        terms.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return BivarPoly.from_terms(terms)


def format_poly(F):
    return "".join(f"{i} {j} {float(np.real(v)):.17g}\n" for i, j, v in F.terms())


def format_terms(F):
    parts = [f"{np.real_if_close(v)}*x^{i}*y^{j}" for i, j, v in F.terms()]
    return " + ".join(parts) if parts else "0"


def read_poly(path):
    with open(path) as fh:
        return parse_poly(fh.read())


def write_poly(F, path):
    with open(path, "w") as fh:
        fh.write(format_poly(F))
