"""Vectorized one-dimensional search helpers shared by the geometric modules.

All routines work on many independent problems at once: ``fn(t, idx)`` evaluates
problem ``idx`` at parameter ``t`` (arrays of identical shape).
"""

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def refine_brackets(fn, idx, lo, hi, tol=1e-13, max_iter=100):
    """Bisection on sign-change brackets followed by one secant step.

    ``fn(lo, idx)`` and ``fn(hi, idx)`` must have opposite signs (or vanish).
    Returns the refined roots.
    """
    idx = np.asarray(idx)
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    f_lo = fn(lo, idx)
    f_hi = fn(hi, idx)
    for _ in range(max_iter):
        if np.max(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid, idx)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
        f_hi = np.where(left, f_hi, f_mid)
    denom = f_hi - f_lo
    safe = denom != 0
    secant = lo - f_lo * (hi - lo) / np.where(safe, denom, 1.0)
    mid = 0.5 * (lo + hi)
    root = np.where(safe, np.clip(secant, lo, hi), mid)
    return root


def golden_minimize(fn, idx, lo, hi, iters=64):
    """Golden-section minimization of ``fn(., idx)`` on ``[lo, hi]`` (vectorized)."""
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = fn(c, idx)
    fd = fn(d, idx)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - GOLDEN * (b - a)
        new_d = a + GOLDEN * (b - a)
        # reuse one interior evaluation, recompute the other
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        probe = np.where(left, c_next, d_next)
        f_probe = fn(probe, idx)
        fc, fd = np.where(left, f_probe, fd), np.where(left, fc, f_probe)
        c, d = c_next, d_next
    t = 0.5 * (a + b)
    return t, fn(t, idx)


def periodic_extremes(fn, n, period, n_grid=512):
    """Minimum and maximum of ``fn(., i)`` over one period, for ``i < n``.

    Grid search refined by golden section. Returns ``(tmin, fmin, tmax, fmax)``.
    """
    idx = np.arange(n)
    h = period / n_grid
    grid = np.arange(n_grid) * h
    vals = fn(grid[None, :] + np.zeros((n, 1)), idx[:, None] + np.zeros((1, n_grid), dtype=int))
    kmin = np.argmin(vals, axis=1)
    kmax = np.argmax(vals, axis=1)
    tmin, fmin = golden_minimize(fn, idx, grid[kmin] - h, grid[kmin] + h)
    neg = lambda t, i: -fn(t, i)  # noqa: E731
    tmax, fmax = golden_minimize(neg, idx, grid[kmax] - h, grid[kmax] + h)
    fmax = -fmax
    # golden section can only improve on the grid value
    gmin = vals[idx, kmin]
    gmax = vals[idx, kmax]
    tmin = np.where(fmin <= gmin, tmin, grid[kmin])
    fmin = np.minimum(fmin, gmin)
    tmax = np.where(fmax >= gmax, tmax, grid[kmax])
    fmax = np.maximum(fmax, gmax)
    return tmin, fmin, tmax, fmax


def periodic_roots(fn, n, period, n_grid=1024):
    """All sign changes of ``fn(., i)`` over one period, for ``i < n``.

    Returns arrays ``(idx, roots, direction)`` where direction is +1 for a
    crossing from negative to positive values and -1 for the opposite.
    Rows whose grid shows no sign change get a local extremum search so that
    narrow excursions between grid nodes are not missed.
    """
    idx_all = np.arange(n)
    h = period / n_grid
    grid = np.arange(n_grid + 1) * h
    T = np.broadcast_to(grid, (n, n_grid + 1))
    I = np.broadcast_to(idx_all[:, None], (n, n_grid + 1))
    vals = fn(T, I)
    pos = vals > 0
    change = pos[:, :-1] != pos[:, 1:]
    rows, ks = np.nonzero(change)
    lo = grid[ks]
    hi = grid[ks + 1]
    direction = np.where(pos[rows, ks + 1], 1, -1)

    extra_rows, extra_lo, extra_hi, extra_dir = [], [], [], []
    quiet = ~change.any(axis=1)
    if quiet.any():
        q = idx_all[quiet]
        all_pos = pos[q, 0]
        sub = lambda t, j: fn(t, q[j])  # noqa: E731
        j = np.arange(q.size)
        kq = np.where(all_pos, np.argmin(vals[q, :-1], axis=1), np.argmax(vals[q, :-1], axis=1))
        flip = lambda t, jj: np.where(all_pos[jj], 1.0, -1.0) * sub(t, jj)  # noqa: E731
        t_ext, f_ext = golden_minimize(flip, j, grid[kq] - h, grid[kq] + h)
        crossed = f_ext < 0
        for jj in np.nonzero(crossed)[0]:
            row = q[jj]
            # values at the extremum have the opposite sign to the grid values
            d_in = 1 if not all_pos[jj] else -1
            extra_rows += [row, row]
            extra_lo += [grid[kq[jj]] - h, t_ext[jj]]
            extra_hi += [t_ext[jj], grid[kq[jj]] + h]
            extra_dir += [d_in, -d_in]
    if extra_rows:
        rows = np.concatenate([rows, extra_rows]).astype(int)
        lo = np.concatenate([lo, extra_lo])
        hi = np.concatenate([hi, extra_hi])
        direction = np.concatenate([direction, extra_dir]).astype(int)

    roots = refine_brackets(fn, rows, lo, hi)
    return rows, np.mod(roots, period), direction
