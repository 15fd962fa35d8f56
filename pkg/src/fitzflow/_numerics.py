"""Small numerical kernels used across the package."""

import math

import numpy as np

from .exceptions import ConvergenceError

ABS_TOL = 1e-12
REL_TOL = 1e-9
MAX_NEWTON_ITER = 200


def monotone_root(fun, lo, hi, dfun=None, tol=1e-14, max_iter=MAX_NEWTON_ITER):
    """Root of a nondecreasing scalar function on ``[lo, hi]``.

    Newton steps are taken when ``dfun`` is given and the step stays inside the
    current bracket; otherwise the bracket is bisected.
    """
    flo, fhi = fun(lo), fun(hi)
    if flo > 0 or fhi < 0:
        raise ValueError("root is not bracketed")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = fun(x)
        if fx == 0:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        if hi - lo <= tol * max(1.0, abs(x)):
            return 0.5 * (lo + hi)
        step_ok = False
        if dfun is not None:
            d = dfun(x)
            if d > 0 and math.isfinite(d):
                xn = x - fx / d
                if lo < xn < hi:
                    x, step_ok = xn, True
        if not step_ok:
            x = 0.5 * (lo + hi)
    raise ConvergenceError("monotone_root: iteration cap reached")


def solve_tridiagonal(lower, diag, upper, rhs):
    """Batched Thomas algorithm.

    All arguments have shape ``(m, n)``; ``lower[:, 0]`` and ``upper[:, -1]``
    are ignored. The systems must be diagonally dominant or SPD.
    """
    m, n = diag.shape
    c = np.empty((m, n))
    d = np.empty((m, n))
    c[:, 0] = upper[:, 0] / diag[:, 0]
    d[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, n):
        denom = diag[:, i] - lower[:, i] * c[:, i - 1]
        c[:, i] = upper[:, i] / denom
        d[:, i] = (rhs[:, i] - lower[:, i] * d[:, i - 1]) / denom
    x = np.empty((m, n))
    x[:, -1] = d[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = d[:, i] - c[:, i] * x[:, i + 1]
    return x


def lower_hull(x, f):
    """Indices of the lower convex hull of points ``(x[i], f[i])``, x increasing.

    Collinear interior points are dropped, so on a flat edge the left (lowest
    index) vertex is kept as the tie-break representative.
    """
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it is on or above the segment a -> i
            cross = (x[b] - x[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def legendre_1d(x, f, y):
    """Discrete Legendre transform ``max_i y*x[i] - f[i]`` in linear time.

    ``x`` must be increasing; ``f`` may contain ``+inf`` (ignored nodes).
    Returns ``(values, argmax)`` where ties go to the lowest node index.
    All-infinite input gives ``-inf`` everywhere and argmax ``-1``.
    """
    x = np.asarray(x, float)
    f = np.asarray(f, float)
    y = np.asarray(y, float)
    finite = np.flatnonzero(np.isfinite(f))
    if finite.size == 0:
        return np.full(y.shape, -np.inf), np.full(y.shape, -1, dtype=int)
    xs, fs = x[finite], f[finite]
    hull = lower_hull(xs, fs)
    hx, hf = xs[hull], fs[hull]
    slopes = np.diff(hf) / np.diff(hx)
    order = np.argsort(y, kind="stable")
    vals = np.empty(y.shape)
    idx = np.empty(y.shape, dtype=int)
    k = 0
    for j in order:
        yj = y[j]
        while k < len(slopes) and yj > slopes[k]:
            k += 1
        vals[j] = yj * hx[k] - hf[k]
        idx[j] = finite[hull[k]]
    return vals, idx


def close(a, b, scale=1.0):
    """Absolute-plus-relative closeness used for real-number equalities."""
    return abs(a - b) <= ABS_TOL + REL_TOL * max(scale, abs(a), abs(b))
