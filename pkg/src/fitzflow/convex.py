"""Extended-real convex functions on R^d.

Every function maps points to ``float`` values in ``R U {+inf}``; ``math.inf``
plays the role of the +infinity marker, and ``-inf`` is never produced by
evaluation. Batched evaluation (``values``) takes arrays of shape ``(m, d)``.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._numerics import ABS_TOL, REL_TOL, legendre_1d, monotone_root, solve_tridiagonal
from .exceptions import (
    ConvergenceError,
    DimensionError,
    ImproperFunctionError,
    NonConvexError,
    OutsideDomainError,
)

INF = math.inf


def as_point(x, dim):
    """Coerce a scalar or sequence to a point of R^dim."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (dim,):
        raise DimensionError(f"expected a point of dimension {dim}, got shape {arr.shape}")
    return arr


def as_batch(X, dim):
    """Coerce input to an array of shape ``(m, dim)``."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None] if dim == 1 else arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got shape {np.shape(X)}")
    return arr


def ext_add(a, b):
    """Extended-real addition (``a + inf = inf``); never yields ``-inf``."""
    if a == INF or b == INF:
        return INF
    return a + b


@dataclass(frozen=True)
class SubdiffSample:
    """Finitely many subgradient selections at ``point``."""

    point: np.ndarray
    slopes: tuple


class ExtConvexFn:
    """Proper convex lsc function ``R^dim -> R U {+inf}``.

    Subclasses implement ``values``, ``_conjugate``, ``subdifferential``,
    ``gradient`` and, where a resolvent is needed, ``prox``.
    """

    dim = 1
    smooth = True  # gradient is Lipschitz on bounded sets and the domain is everything

    @property
    def differentiable(self):
        """Finite and differentiable everywhere (gradient possibly not Lipschitz)."""
        return self.smooth

    def values(self, X):
        raise NotImplementedError

    def __call__(self, x):
        return float(self.values(as_point(x, self.dim)[None, :])[0])

    def eval(self, x):
        return self(x)

    def conjugate(self):
        return self._conj

    @cached_property
    def _conj(self):
        return self._conjugate()

    def _conjugate(self):
        raise NotImplementedError

    def subdifferential(self, x):
        raise NotImplementedError

    def gradient(self, X):
        """One subgradient selection per row of ``X`` (rows must be in the domain)."""
        raise NotImplementedError

    def prox(self, tau, r):
        """``argmin_x f(x) + |x - r|^2 / (2 tau)``, i.e. the resolvent of ``tau * df``."""
        raise NotImplementedError(f"{type(self).__name__} has no proximal map")

    def prox_batch(self, tau, R):
        """Row-wise ``prox``; subclasses vectorize where it is cheap."""
        R = as_batch(R, self.dim)
        return np.array([self.prox(tau, r) for r in R]).reshape(R.shape)

    def project_domain(self, X):
        """Nearest points of the effective domain (identity for full-domain functions)."""
        return as_batch(X, self.dim)

    def describe(self):
        raise NotImplementedError

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "tag")
        return f"{self.describe()['tag']}({params})"

    def _check_finite_at(self, x):
        x = as_point(x, self.dim)
        if self(x) == INF:
            raise OutsideDomainError(f"{self!r} is +inf at {x}")
        return x


def _interval_samples(lo, hi):
    """``{low, mid, high}`` selections of an interval, unbounded ends replaced by a unit step."""
    if lo == -INF and hi == INF:
        lo, hi = -1.0, 1.0
    elif lo == -INF:
        lo = hi - 1.0
    elif hi == INF:
        hi = lo + 1.0
    if hi - lo <= ABS_TOL + REL_TOL * max(1.0, abs(lo), abs(hi)):
        return [0.5 * (lo + hi)]
    return [lo, 0.5 * (lo + hi), hi]


# ---------------------------------------------------------------------------
# Smooth catalog entries
# ---------------------------------------------------------------------------


class Quadratic(ExtConvexFn):
    """``x -> b |x|^2`` with ``b > 0``."""

    def __init__(self, b, dim=1):
        if not b > 0:
            raise ValueError("Quadratic needs b > 0")
        self.b = float(b)
        self.dim = int(dim)

    def values(self, X):
        X = as_batch(X, self.dim)
        return self.b * np.einsum("ij,ij->i", X, X)

    def _conjugate(self):
        return Quadratic(1.0 / (4.0 * self.b), self.dim)

    def gradient(self, X):
        return 2.0 * self.b * as_batch(X, self.dim)

    def subdifferential(self, x):
        x = as_point(x, self.dim)
        return SubdiffSample(x, (2.0 * self.b * x,))

    def prox(self, tau, r):
        return as_point(r, self.dim) / (1.0 + 2.0 * self.b * tau)

    def prox_batch(self, tau, R):
        return as_batch(R, self.dim) / (1.0 + 2.0 * self.b * tau)

    @property
    def modulus(self):
        """``c`` with ``grad f(x) = c x``; used by linear reductions."""
        return 2.0 * self.b

    def describe(self):
        return {"tag": "Quadratic", "b": self.b, "dim": self.dim}


class HalfNormSq(ExtConvexFn):
    """``x -> |x|^2 / 2`` (self-conjugate)."""

    modulus = 1.0

    def __init__(self, dim=1):
        self.dim = int(dim)

    def values(self, X):
        X = as_batch(X, self.dim)
        return 0.5 * np.einsum("ij,ij->i", X, X)

    def _conjugate(self):
        return self

    def gradient(self, X):
        return as_batch(X, self.dim).copy()

    def subdifferential(self, x):
        x = as_point(x, self.dim)
        return SubdiffSample(x, (x.copy(),))

    def prox(self, tau, r):
        return as_point(r, self.dim) / (1.0 + tau)

    def prox_batch(self, tau, R):
        return as_batch(R, self.dim) / (1.0 + tau)

    def describe(self):
        return {"tag": "HalfNormSq", "dim": self.dim}


class AbsPower(ExtConvexFn):
    """``x -> |x|^p / p`` for ``p >= 1``; ``p = 1`` is the Euclidean norm."""

    def __init__(self, p, dim=1):
        if not p >= 1:
            raise ValueError("AbsPower needs p >= 1")
        self.p = float(p)
        self.dim = int(dim)
        self.smooth = self.p >= 2

    @property
    def differentiable(self):
        return self.p > 1

    def values(self, X):
        X = as_batch(X, self.dim)
        return np.linalg.norm(X, axis=1) ** self.p / self.p

    def _conjugate(self):
        if self.p == 1.0:
            return Indicator(Ball(np.zeros(self.dim), 1.0))
        q = self.p / (self.p - 1.0)
        return AbsPower(q, self.dim)

    def gradient(self, X):
        X = as_batch(X, self.dim)
        r = np.linalg.norm(X, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(r > 0, r ** (self.p - 2.0), 0.0)
        return X * fac[:, None]

    def subdifferential(self, x):
        x = as_point(x, self.dim)
        r = np.linalg.norm(x)
        if r > 0 or self.p > 1:
            return SubdiffSample(x, (self.gradient(x[None])[0],))
        # unit ball at the kink
        if self.dim == 1:
            return SubdiffSample(x, tuple(np.array([s]) for s in (-1.0, 0.0, 1.0)))
        slopes = [np.zeros(self.dim)]
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            slopes += [-e, e]
        return SubdiffSample(x, tuple(slopes))

    def prox(self, tau, r):
        r = as_point(r, self.dim)
        rho = float(np.linalg.norm(r))
        if rho == 0.0:
            return np.zeros(self.dim)
        p = self.p
        if p == 1.0:
            s = max(rho - tau, 0.0)
        elif p == 2.0:
            s = rho / (1.0 + tau)
        else:
            s = monotone_root(
                lambda s: s + tau * s ** (p - 1.0) - rho,
                0.0,
                rho,
                dfun=lambda s: 1.0 + tau * (p - 1.0) * s ** (p - 2.0),
            )
        return r * (s / rho)

    def prox_batch(self, tau, R):
        R = as_batch(R, self.dim)
        if self.p not in (1.0, 2.0):
            return super().prox_batch(tau, R)
        rho = np.linalg.norm(R, axis=1)
        if self.p == 1.0:
            s = np.maximum(rho - tau, 0.0)
        else:
            s = rho / (1.0 + tau)
        fac = np.divide(s, rho, out=np.zeros_like(rho), where=rho > 0)
        return R * fac[:, None]

    def describe(self):
        return {"tag": "AbsPower", "p": self.p, "dim": self.dim}


# ---------------------------------------------------------------------------
# Convex sets, indicators and support functions
# ---------------------------------------------------------------------------


class Point:
    """Singleton ``{c}``."""

    def __init__(self, c):
        self.c = np.atleast_1d(np.asarray(c, dtype=float)).copy()
        self.dim = self.c.size

    def contains(self, X, tol=ABS_TOL):
        X = as_batch(X, self.dim)
        scale = 1.0 + np.abs(self.c).max()
        return np.abs(X - self.c).max(axis=1) <= tol * scale

    def project(self, X):
        X = as_batch(X, self.dim)
        return np.broadcast_to(self.c, X.shape).copy()

    def support(self, Y):
        return as_batch(Y, self.dim) @ self.c

    def support_argmax(self, y):
        return [self.c.copy()]

    def normal_samples(self, x):
        # normal cone of a point is all of R^d
        out = [np.zeros(self.dim)]
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            out += [-e, e]
        return out

    def describe(self):
        return {"kind": "point", "c": self.c.tolist()}


class Box:
    """Axis-aligned box ``[lo, hi]``."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("Box needs lo <= hi with matching shapes")
        self.dim = self.lo.size

    def _scale(self):
        return 1.0 + max(np.abs(self.lo).max(), np.abs(self.hi).max())

    def contains(self, X, tol=ABS_TOL):
        X = as_batch(X, self.dim)
        t = tol * self._scale()
        return np.all((X >= self.lo - t) & (X <= self.hi + t), axis=1)

    def project(self, X):
        return np.clip(as_batch(X, self.dim), self.lo, self.hi)

    def support(self, Y):
        Y = as_batch(Y, self.dim)
        return np.maximum(Y * self.lo, Y * self.hi).sum(axis=1)

    def support_argmax(self, y):
        y = as_point(y, self.dim)
        base = np.where(y > 0, self.hi, np.where(y < 0, self.lo, 0.5 * (self.lo + self.hi)))
        out = [base]
        for i in np.flatnonzero(y == 0):
            if self.hi[i] > self.lo[i]:
                for end in (self.lo[i], self.hi[i]):
                    q = base.copy()
                    q[i] = end
                    out.append(q)
        return out

    def normal_samples(self, x):
        x = as_point(x, self.dim)
        t = ABS_TOL * self._scale()
        out = [np.zeros(self.dim)]
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            if x[i] >= self.hi[i] - t:
                out.append(e)
            if x[i] <= self.lo[i] + t:
                out.append(-e)
        return out

    def describe(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Ball:
    """Closed Euclidean ball."""

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float)).copy()
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("Ball radius must be >= 0")
        self.dim = self.center.size

    def contains(self, X, tol=ABS_TOL):
        X = as_batch(X, self.dim)
        scale = 1.0 + self.radius + np.abs(self.center).max()
        return np.linalg.norm(X - self.center, axis=1) <= self.radius + tol * scale

    def project(self, X):
        X = as_batch(X, self.dim)
        D = X - self.center
        r = np.linalg.norm(D, axis=1)
        fac = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return self.center + D * fac[:, None]

    def support(self, Y):
        Y = as_batch(Y, self.dim)
        return Y @ self.center + self.radius * np.linalg.norm(Y, axis=1)

    def support_argmax(self, y):
        y = as_point(y, self.dim)
        n = np.linalg.norm(y)
        if n > 0:
            return [self.center + self.radius * y / n]
        out = [self.center.copy()]
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = self.radius
            out += [self.center - e, self.center + e]
        return out

    def normal_samples(self, x):
        x = as_point(x, self.dim)
        d = x - self.center
        n = np.linalg.norm(d)
        out = [np.zeros(self.dim)]
        if self.radius == 0:
            return Point(self.center).normal_samples(x)
        if n >= self.radius * (1 - REL_TOL):
            out.append(d / n)
        return out

    def describe(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


def make_set(desc):
    kind = desc["kind"]
    if kind == "point":
        return Point(desc["c"])
    if kind == "box":
        return Box(desc["lo"], desc["hi"])
    if kind == "ball":
        return Ball(desc["center"], desc["radius"])
    raise ValueError(f"unknown set kind {kind!r}")


class Indicator(ExtConvexFn):
    """``0`` on a closed convex set, ``+inf`` outside."""

    smooth = False

    def __init__(self, cset):
        self.set = cset
        self.dim = cset.dim

    def values(self, X):
        inside = self.set.contains(as_batch(X, self.dim))
        return np.where(inside, 0.0, INF)

    def _conjugate(self):
        return Support(self.set)

    def gradient(self, X):
        return np.zeros_like(as_batch(X, self.dim))

    def subdifferential(self, x):
        x = self._check_finite_at(x)
        return SubdiffSample(x, tuple(self.set.normal_samples(x)))

    def prox(self, tau, r):
        return self.set.project(as_point(r, self.dim))[0]

    def prox_batch(self, tau, R):
        return self.set.project(R)

    def project_domain(self, X):
        return self.set.project(X)

    def describe(self):
        return {"tag": "Indicator", "set": self.set.describe()}


class Support(ExtConvexFn):
    """Support function ``y -> max_{x in C} <y, x>``; linear when C is a point."""

    def __init__(self, cset):
        self.set = cset
        self.dim = cset.dim
        self.smooth = isinstance(cset, Point)

    def values(self, Y):
        return self.set.support(as_batch(Y, self.dim))

    def _conjugate(self):
        return Indicator(self.set)

    def gradient(self, Y):
        Y = as_batch(Y, self.dim)
        return np.array([self.set.support_argmax(y)[0] for y in Y])

    def subdifferential(self, y):
        y = as_point(y, self.dim)
        return SubdiffSample(y, tuple(self.set.support_argmax(y)))

    def prox(self, tau, r):
        # Moreau decomposition
        r = as_point(r, self.dim)
        return r - tau * self.set.project(r / tau)[0]

    def prox_batch(self, tau, R):
        R = as_batch(R, self.dim)
        return R - tau * self.set.project(R / tau)

    def describe(self):
        return {"tag": "Support", "set": self.set.describe()}


def Zero(dim=1):
    """The zero function (support function of ``{0}``)."""
    return Support(Point(np.zeros(dim)))


# ---------------------------------------------------------------------------
# Piecewise quadratic functions of one variable
# ---------------------------------------------------------------------------


class PiecewiseQuadratic1D(ExtConvexFn):
    """Continuous convex piecewise quadratic on an interval ``[lo, hi]``.

    Piece ``i`` is ``a_i x^2 + s_i x + c_i`` between consecutive breakpoints.
    Outside the domain the function is ``+inf``. The class is closed under
    conjugation, which is computed exactly.
    """

    dim = 1

    def __init__(self, breakpoints, coeffs, domain=(-INF, INF)):
        self.breakpoints = np.asarray(breakpoints, dtype=float).reshape(-1)
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(-1, 3)
        self.lo, self.hi = float(domain[0]), float(domain[1])
        if len(self.coeffs) != len(self.breakpoints) + 1:
            raise ValueError("need one more piece than breakpoints")
        if self.lo > self.hi:
            raise ImproperFunctionError("empty domain")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.breakpoints) and (self.breakpoints[0] <= self.lo or self.breakpoints[-1] >= self.hi):
            raise ValueError("breakpoints must lie inside the domain")
        if np.any(self.coeffs[:, 0] < 0):
            raise NonConvexError("negative curvature in a piece")
        self.smooth = math.isinf(self.lo) and math.isinf(self.hi)
        for i, b in enumerate(self.breakpoints):
            left, right = self._piece_value(i, b), self._piece_value(i + 1, b)
            scale = 1.0 + abs(left) + abs(right)
            if abs(left - right) > 1e-9 * scale:
                raise NonConvexError(f"discontinuity at breakpoint {b}")
            if self._piece_slope(i, b) > self._piece_slope(i + 1, b) + 1e-9 * scale:
                raise NonConvexError(f"slope decreases at breakpoint {b}")
            if self._piece_slope(i + 1, b) - self._piece_slope(i, b) > 1e-9 * scale:
                self.smooth = False
        # an unbounded end needs the function to stay finite and convex: fine by a_i >= 0

    def _piece_value(self, i, x):
        a, s, c = self.coeffs[i]
        return a * x * x + s * x + c

    def _piece_slope(self, i, x):
        a, s, _ = self.coeffs[i]
        return 2.0 * a * x + s

    def _piece_bounds(self, i):
        left = self.lo if i == 0 else self.breakpoints[i - 1]
        right = self.hi if i == len(self.coeffs) - 1 else self.breakpoints[i]
        return left, right

    def values(self, X):
        x = as_batch(X, 1)[:, 0]
        idx = np.searchsorted(self.breakpoints, x, side="left")
        a, s, c = self.coeffs[idx].T
        out = a * x * x + s * x + c
        tol = ABS_TOL * (1.0 + np.abs(x))
        outside = (x < self.lo - tol) | (x > self.hi + tol)
        return np.where(outside, INF, out)

    def _slope_interval(self, x):
        """``[f'(x-), f'(x+)]`` with infinite ends at the domain boundary."""
        k = len(self.coeffs)
        idx = int(np.searchsorted(self.breakpoints, x, side="left"))
        at_break = idx < len(self.breakpoints) and x == self.breakpoints[idx]
        if at_break:
            left, right = self._piece_slope(idx, x), self._piece_slope(idx + 1, x)
        else:
            left = right = self._piece_slope(idx, x)
        if x <= self.lo:
            left = -INF
            right = self._piece_slope(0, x)
        if x >= self.hi:
            right = INF
            if not x <= self.lo:
                left = self._piece_slope(k - 1, x)
        return left, right

    def subdifferential(self, x):
        x = self._check_finite_at(x)
        xv = min(max(float(x[0]), self.lo), self.hi)
        lo, hi = self._slope_interval(xv)
        return SubdiffSample(x, tuple(np.array([s]) for s in _interval_samples(lo, hi)))

    def gradient(self, X):
        x = np.clip(as_batch(X, 1)[:, 0], self.lo, self.hi)
        out = np.empty_like(x)
        for j, xv in enumerate(x):
            lo, hi = self._slope_interval(xv)
            out[j] = _interval_samples(lo, hi)[len(_interval_samples(lo, hi)) // 2]
        return out[:, None]

    def project_domain(self, X):
        return np.clip(as_batch(X, 1), self.lo, self.hi)

    def prox(self, tau, r):
        r = float(as_point(r, 1)[0])
        for i in range(len(self.coeffs)):
            a, s, _ = self.coeffs[i]
            left, right = self._piece_bounds(i)
            x = (r - tau * s) / (1.0 + 2.0 * tau * a)
            if left < x < right:
                return np.array([x])
        nodes = [self.lo] + list(self.breakpoints) + [self.hi]
        for b in nodes:
            if not math.isfinite(b):
                continue
            lo, hi = self._slope_interval(b)
            g = (r - b) / tau
            tol = 1e-12 * (1.0 + abs(g))
            if lo - tol <= g <= hi + tol:
                return np.array([b])
        raise ConvergenceError("prox of piecewise quadratic not located")

    def _conjugate(self):
        # walk the pieces left to right; each emits the conjugate piece valid
        # over the slope range it produces
        items = []

        def emit(coef, y_from, y_to):
            if y_to > y_from:
                items.append((coef, y_from, y_to))

        k = len(self.coeffs)
        if math.isfinite(self.lo):
            emit((0.0, self.lo, -self._piece_value(0, self.lo)), -INF, self._piece_slope(0, self.lo))
        for i in range(k):
            a, s, c = self.coeffs[i]
            left, right = self._piece_bounds(i)
            if a > 0:
                y0 = self._piece_slope(i, left) if math.isfinite(left) else -INF
                y1 = self._piece_slope(i, right) if math.isfinite(right) else INF
                emit((1.0 / (4 * a), -s / (2 * a), s * s / (4 * a) - c), y0, y1)
            if i < k - 1:
                b = self.breakpoints[i]
                emit((0.0, b, -self._piece_value(i, b)), self._piece_slope(i, b), self._piece_slope(i + 1, b))
        if math.isfinite(self.hi):
            emit((0.0, self.hi, -self._piece_value(k - 1, self.hi)), self._piece_slope(k - 1, self.hi), INF)
        if not items:
            # affine on R: the conjugate is finite at a single slope
            _, s, c = self.coeffs[0]
            return PiecewiseQuadratic1D([], [(0.0, 0.0, -c)], domain=(s, s))
        bps = [it[1] for it in items[1:]]
        return PiecewiseQuadratic1D(bps, [it[0] for it in items], domain=(items[0][1], items[-1][2]))

    def describe(self):
        return {
            "tag": "PiecewiseQuadratic1D",
            "breakpoints": self.breakpoints.tolist(),
            "coeffs": self.coeffs.tolist(),
            "domain": [self.lo, self.hi],
        }


# ---------------------------------------------------------------------------
# Affine reparametrisations
# ---------------------------------------------------------------------------


class Affine(ExtConvexFn):
    """``x -> scale * f((x - shift) / arg_scale) + <tilt, x> + const``.

    Closed under conjugation: the conjugate is again of this form, built on
    ``f*``.
    """

    def __init__(self, base, scale=1.0, arg_scale=1.0, shift=0.0, tilt=0.0, const=0.0):
        if not (scale > 0 and arg_scale > 0):
            raise ValueError("scale and arg_scale must be positive")
        self.base = base
        self.dim = base.dim
        self.scale = float(scale)
        self.arg_scale = float(arg_scale)
        self.shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.dim,)).copy()
        self.tilt = np.broadcast_to(np.asarray(tilt, dtype=float), (self.dim,)).copy()
        self.const = float(const)
        self.smooth = base.smooth
        self._differentiable = base.differentiable

    @property
    def differentiable(self):
        return self._differentiable

    def _inner(self, X):
        return (as_batch(X, self.dim) - self.shift) / self.arg_scale

    def values(self, X):
        X = as_batch(X, self.dim)
        return self.scale * self.base.values(self._inner(X)) + X @ self.tilt + self.const

    def _conjugate(self):
        return Affine(
            self.base.conjugate(),
            scale=self.scale,
            arg_scale=self.scale / self.arg_scale,
            shift=self.tilt,
            tilt=self.shift,
            const=-float(self.shift @ self.tilt) - self.const,
        )

    def gradient(self, X):
        return (self.scale / self.arg_scale) * self.base.gradient(self._inner(X)) + self.tilt

    def subdifferential(self, x):
        x = self._check_finite_at(x)
        inner = self.base.subdifferential(self._inner(x)[0])
        fac = self.scale / self.arg_scale
        return SubdiffSample(x, tuple(fac * s + self.tilt for s in inner.slopes))

    def prox(self, tau, r):
        r = as_point(r, self.dim)
        s = self.arg_scale
        z = self.base.prox(tau * self.scale / s**2, (r - tau * self.tilt - self.shift) / s)
        return self.shift + s * z

    def project_domain(self, X):
        return self.shift + self.arg_scale * self.base.project_domain(self._inner(X))

    @property
    def modulus(self):
        m = getattr(self.base, "modulus", None)
        if m is None or np.any(self.shift) or np.any(self.tilt):
            return None
        return self.scale * m / self.arg_scale**2

    def describe(self):
        return {
            "tag": "Affine",
            "base": self.base.describe(),
            "scale": self.scale,
            "arg_scale": self.arg_scale,
            "shift": self.shift.tolist(),
            "tilt": self.tilt.tolist(),
            "const": self.const,
        }


def Scaled(f, c):
    """``x -> c f(x)``."""
    return Affine(f, scale=c)


def Shifted(f, a):
    """``x -> f(x - a)``."""
    return Affine(f, shift=a)


# ---------------------------------------------------------------------------
# Discrete p-Dirichlet energy (potential of the 1D p-Laplacian)
# ---------------------------------------------------------------------------


class PDirichletEnergy(ExtConvexFn):
    """``v -> sum_i |(Dv)_i|^p / p`` on ``n`` interior nodes of a uniform mesh.

    ``D`` is the forward difference with spacing ``h`` and zero end values, so
    the gradient ``D^T(|Dv|^(p-2) Dv)`` is the finite-difference p-Laplacian.
    """

    def __init__(self, p, n, h=None):
        if not p >= 2:
            raise ValueError("PDirichletEnergy needs p >= 2")
        self.p = float(p)
        self.dim = self.n = int(n)
        self.h = float(h) if h is not None else 1.0 / (n + 1)

    def diff(self, V):
        V = as_batch(V, self.n)
        padded = np.zeros((V.shape[0], self.n + 2))
        padded[:, 1:-1] = V
        return np.diff(padded, axis=1) / self.h

    def diff_transpose(self, E):
        # adjoint of diff: (D^T e)_j = (e_{j-1} - e_j) / h
        return (E[:, :-1] - E[:, 1:]) / self.h

    def values(self, V):
        return np.sum(np.abs(self.diff(V)) ** self.p, axis=1) / self.p

    def gradient(self, V):
        E = self.diff(V)
        return self.diff_transpose(np.abs(E) ** (self.p - 2.0) * E)

    def subdifferential(self, x):
        x = as_point(x, self.n)
        return SubdiffSample(x, (self.gradient(x[None])[0],))

    def matrix(self):
        """Second-difference matrix ``D^T D`` (the operator itself when p = 2)."""
        return self.diff_transpose(self.diff(np.eye(self.n))).T

    def _hess_bands(self, V):
        E = self.diff(V)
        k = (self.p - 1.0) * np.abs(E) ** (self.p - 2.0) / self.h**2
        diag = k[:, :-1] + k[:, 1:]
        off = -k[:, 1:-1]
        return diag, off

    def solve_gradient_equation(self, rhs, mass):
        """Rows ``x`` with ``mass * x + grad(x) = rhs`` by damped Newton.

        Equivalent to minimizing the strictly convex
        ``psi(x) + mass/2 |x|^2 - <rhs, x>``; the Armijo backtracking halves
        the step until sufficient decrease (bisection safeguard).
        """
        R = as_batch(rhs, self.n)
        m = R.shape[0]
        if mass == 0:
            # degree-(p-1) homogeneity gives a scaled p = 2 starting guess
            L = self.matrix()
            X = np.linalg.solve(L, R.T).T
            g = self.gradient(X)
            num = np.einsum("ij,ij->i", R, X)
            den = np.einsum("ij,ij->i", g, X)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(den > 0, np.abs(num / den) ** (1.0 / (self.p - 1.0)), 0.0)
            X = X * t[:, None]
        else:
            X = R / (mass + 1.0)

        def objective(X, Rs):
            return self.values(X) + 0.5 * mass * np.einsum("ij,ij->i", X, X) - np.einsum("ij,ij->i", Rs, X)

        scale = 1.0 + np.linalg.norm(R, axis=1)
        active = np.ones(m, dtype=bool)
        for _ in range(200):
            res = mass * X + self.gradient(X) - R
            rn = np.linalg.norm(res, axis=1)
            active = rn > 1e-11 * scale
            if not active.any():
                return X
            idx = np.flatnonzero(active)
            Xa = X[idx]
            diag, off = self._hess_bands(Xa)
            diag = diag + mass + 1e-14 * (1.0 + diag.max(axis=1, keepdims=True))
            lower = np.zeros_like(diag)
            upper = np.zeros_like(diag)
            lower[:, 1:] = off
            upper[:, :-1] = off
            step = solve_tridiagonal(lower, diag, upper, -res[idx])
            f0 = objective(Xa, R[idx])
            slope = np.einsum("ij,ij->i", res[idx], step)
            t = np.ones(len(idx))
            for _ in range(60):
                trial = Xa + t[:, None] * step
                ok = objective(trial, R[idx]) <= f0 + 1e-4 * t * slope + 1e-15 * np.abs(f0)
                if ok.all():
                    break
                t = np.where(ok, t, 0.5 * t)
            X[idx] = Xa + t[:, None] * step
        raise ConvergenceError("p-Laplacian Newton solve did not converge")

    def prox(self, tau, r):
        r = as_point(r, self.n)
        return self.solve_gradient_equation(r[None] / tau, 1.0 / tau)[0]

    def _conjugate(self):
        return NumericConjugate(self)

    def describe(self):
        return {"tag": "PDirichletEnergy", "p": self.p, "n": self.n, "h": self.h}


class NumericConjugate(ExtConvexFn):
    """Conjugate of a smooth, coercive, strictly convex ``f`` that can solve
    ``grad f(x) = y``; values ``<y, x(y)> - f(x(y))``."""

    # the base is strictly convex, so the conjugate is differentiable
    differentiable = True

    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def maximizer(self, Y):
        return self.base.solve_gradient_equation(as_batch(Y, self.dim), 0.0)

    def values(self, Y):
        Y = as_batch(Y, self.dim)
        X = self.maximizer(Y)
        return np.einsum("ij,ij->i", Y, X) - self.base.values(X)

    def gradient(self, Y):
        return self.maximizer(Y)

    def subdifferential(self, y):
        y = as_point(y, self.dim)
        return SubdiffSample(y, (self.maximizer(y[None])[0],))

    def _conjugate(self):
        return self.base

    def describe(self):
        return {"tag": "NumericConjugate", "base": self.base.describe()}


# ---------------------------------------------------------------------------
# Grid-backed functions (d in {1, 2})
# ---------------------------------------------------------------------------


class GridConvexFn(ExtConvexFn):
    """Nodal values on a uniform axis-aligned grid, multilinear in between."""

    smooth = False

    def __init__(self, lo, hi, values):
        vals = np.array(values, dtype=float)
        if vals.ndim not in (1, 2):
            raise DimensionError("grid functions support d in {1, 2}")
        self.dim = vals.ndim
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,)).copy()
        if np.any(self.hi <= self.lo) or any(n < 2 for n in vals.shape):
            raise ValueError("grid needs lo < hi and at least two nodes per axis")
        if np.any(np.isnan(vals)) or np.any(vals == -INF):
            raise ValueError("grid values must be finite or +inf")
        if not np.isfinite(vals).any():
            raise ImproperFunctionError("grid function is +inf everywhere")
        vals.setflags(write=False)
        self.nodal = vals
        self.shape = vals.shape
        self._check_convex()

    @classmethod
    def from_function(cls, fun, lo, hi, n):
        """Sample ``fun`` (acting on ``(m, d)`` batches) at the grid nodes."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        shape = tuple(np.broadcast_to(np.asarray(n), lo.shape).tolist())
        axes = [np.linspace(a, b, k) for a, b, k in zip(lo, hi, shape)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(shape))
        return cls(lo, hi, np.asarray(fun(mesh), dtype=float).reshape(shape))

    @property
    def axes(self):
        return [np.linspace(a, b, k) for a, b, k in zip(self.lo, self.hi, self.shape)]

    @property
    def spacing(self):
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    def nodes(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def _lines(self):
        if self.dim == 1:
            yield self.nodal
        else:
            yield from self.nodal
            yield from self.nodal.T

    def _check_convex(self):
        finite = self.nodal[np.isfinite(self.nodal)]
        scale = max(1.0, np.abs(finite).max())
        for line in self._lines():
            idx = np.flatnonzero(np.isfinite(line))
            if idx.size == 0:
                continue
            if idx[-1] - idx[0] + 1 != idx.size:
                raise NonConvexError("finite region of a grid line is not an interval")
            seg = line[idx[0] : idx[-1] + 1]
            if seg.size >= 3 and np.min(np.diff(seg, 2)) < -1e-12 * scale:
                raise NonConvexError("negative second difference on a grid line")

    def values(self, X):
        X = as_batch(X, self.dim)
        out = np.full(X.shape[0], INF)
        h = self.spacing
        tol = ABS_TOL * (1.0 + np.abs(self.lo) + np.abs(self.hi))
        inside = np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=1)
        if not inside.any():
            return out
        Xi = np.clip(X[inside], self.lo, self.hi)
        pos = (Xi - self.lo) / h
        base = np.minimum(np.floor(pos).astype(int), np.array(self.shape) - 2)
        frac = pos - base
        acc = np.zeros(Xi.shape[0])
        bad = np.zeros(Xi.shape[0], dtype=bool)
        for corner in np.ndindex(*([2] * self.dim)):
            c = np.array(corner)
            w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
            v = self.nodal[tuple((base + c).T)]
            part = w > 0
            bad |= part & ~np.isfinite(v)
            acc += np.where(part & np.isfinite(v), w * np.where(np.isfinite(v), v, 0.0), 0.0)
        out[inside] = np.where(bad, INF, acc)
        return out

    def slope_range(self):
        """Per-axis min/max forward-difference slopes over the finite region."""
        lows, highs = [], []
        h = self.spacing
        for axis in range(self.dim):
            with np.errstate(invalid="ignore"):
                d = np.diff(self.nodal, axis=axis) / h[axis]
            d = d[np.isfinite(d)]
            if d.size == 0:
                lows.append(0.0)
                highs.append(0.0)
            else:
                lows.append(d.min())
                highs.append(d.max())
        return np.array(lows), np.array(highs)

    def dual_grid(self):
        lo, hi = self.slope_range()
        width = hi - lo
        pad = np.where(width > 0, 0.1 * width, 0.1 * np.maximum(np.abs(lo), 1.0))
        return lo - pad, hi + pad

    def _conjugate(self):
        ylo, yhi = self.dual_grid()
        yaxes = [np.linspace(a, b, k) for a, b, k in zip(ylo, yhi, self.shape)]
        xaxes = self.axes
        if self.dim == 1:
            vals, _ = legendre_1d(xaxes[0], self.nodal, yaxes[0])
            return GridConvexFn(ylo, yhi, vals)
        # separable two-pass transform: inner sup over x2, then over x1
        inner = np.empty((self.shape[0], self.shape[1]))
        for i in range(self.shape[0]):
            inner[i], _ = legendre_1d(xaxes[1], self.nodal[i], yaxes[1])
        outer = np.empty(self.shape)
        neg = -inner
        neg[~np.isfinite(neg)] = INF
        for j in range(self.shape[1]):
            outer[:, j], _ = legendre_1d(xaxes[0], neg[:, j], yaxes[0])
        return GridConvexFn(ylo, yhi, outer)

    def discrete_conjugate_at(self, Y):
        """Brute-force ``max over finite nodes of <y, x> - f(x)``."""
        Y = as_batch(Y, self.dim)
        X = self.nodes()
        f = self.nodal.reshape(-1)
        keep = np.isfinite(f)
        return np.max(Y @ X[keep].T - f[keep], axis=1)

    def cell_bound(self):
        """Error allowance for one conjugation round trip on this grid and its dual."""
        dual = self.conjugate()
        return float(np.sum(dual.spacing * (self.hi - self.lo)) + np.sum(self.spacing * (dual.hi - dual.lo)))

    def gradient(self, X):
        X = as_batch(X, self.dim)
        h = self.spacing
        out = np.empty_like(X)
        for j, x in enumerate(X):
            for a in range(self.dim):
                e = np.zeros(self.dim)
                e[a] = h[a]
                fp, fm, f0 = self(x + e), self(x - e), self(x)
                if math.isfinite(fp) and math.isfinite(fm):
                    out[j, a] = (fp - fm) / (2 * h[a])
                elif math.isfinite(fp):
                    out[j, a] = (fp - f0) / h[a]
                elif math.isfinite(fm):
                    out[j, a] = (f0 - fm) / h[a]
                else:
                    out[j, a] = 0.0
        return out

    def subdifferential(self, x):
        x = self._check_finite_at(x)
        h = self.spacing
        f0 = self(x)
        lows, highs = [], []
        for a in range(self.dim):
            e = np.zeros(self.dim)
            e[a] = h[a]
            fp, fm = self(x + e), self(x - e)
            lows.append((f0 - fm) / h[a] if math.isfinite(fm) else -INF)
            highs.append((fp - f0) / h[a] if math.isfinite(fp) else INF)
        if self.dim == 1:
            return SubdiffSample(x, tuple(np.array([s]) for s in _interval_samples(lows[0], highs[0])))
        per_axis = [_interval_samples(lo, hi) for lo, hi in zip(lows, highs)]
        mids = np.array([s[len(s) // 2] for s in per_axis])
        slopes = [mids]
        for a, samples in enumerate(per_axis):
            for s in (samples[0], samples[-1]):
                if s != mids[a]:
                    q = mids.copy()
                    q[a] = s
                    slopes.append(q)
        return SubdiffSample(x, tuple(slopes))

    def project_domain(self, X):
        return np.clip(as_batch(X, self.dim), self.lo, self.hi)

    def describe(self):
        return {"tag": "Grid", "lo": self.lo.tolist(), "hi": self.hi.tolist(), "shape": list(self.shape)}

    def to_csv_rows(self):
        """``(header, rows)`` with node coordinates then value (``+inf`` literal)."""
        header = [f"x{i + 1}" for i in range(self.dim)] + ["value"]
        rows = []
        for x, v in zip(self.nodes(), self.nodal.reshape(-1)):
            rows.append([*(repr(float(c)) for c in x), "+inf" if v == INF else repr(float(v))])
        return header, rows

    @classmethod
    def from_csv_rows(cls, header, rows):
        dim = len(header) - 1
        data = np.array([[float(c) for c in r] for r in rows])
        coords, vals = data[:, :dim], data[:, dim]
        axes = [np.unique(coords[:, a]) for a in range(dim)]
        shape = tuple(len(a) for a in axes)
        idx = tuple(np.searchsorted(axes[a], coords[:, a]) for a in range(dim))
        grid = np.full(shape, np.nan)
        grid[idx] = vals
        return cls([a[0] for a in axes], [a[-1] for a in axes], grid)


def moreau_envelope(f, eps, X):
    """Values and gradients of ``x -> min_y f(y) + |x - y|^2 / (2 eps)``."""
    X = as_batch(X, f.dim)
    P = f.prox_batch(eps, X)
    diff = X - P
    return f.values(P) + np.einsum("ij,ij->i", diff, diff) / (2.0 * eps), diff / eps


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def fenchel_young_gap(f, x, y):
    """``f(x) + f*(y) - <x, y>`` (``+inf`` if either term is infinite)."""
    x = as_point(x, f.dim)
    y = as_point(y, f.dim)
    total = ext_add(f(x), f.conjugate()(y))
    if total == INF:
        return INF
    return total - float(x @ y)


def biconjugate_check(f, probes):
    """Max of ``|f**(x) - f(x)|`` over probes where ``f`` is finite."""
    P = as_batch(probes, f.dim)
    fx = f.values(P)
    keep = np.isfinite(fx)
    if not keep.any():
        return 0.0
    P, fx = P[keep], fx[keep]
    if isinstance(f, GridConvexFn):
        ff = f.conjugate().discrete_conjugate_at(P)
    else:
        ff = f.conjugate().conjugate().values(P)
    if not np.all(np.isfinite(ff)):
        return INF
    return float(np.max(np.abs(ff - fx)))


def subgradient_violation(f, sample, probes):
    """Largest relative violation of ``f(y) >= f(x) + <s, y - x>`` over probes (<= 0 is fine)."""
    P = as_batch(probes, f.dim)
    fy = f.values(P)
    fx = f(sample.point)
    keep = np.isfinite(fy)
    worst = -INF
    for s in sample.slopes:
        rhs = fx + (P[keep] - sample.point) @ s
        scale = 1.0 + np.abs(fy[keep]) + np.abs(rhs)
        worst = max(worst, float(np.max((rhs - fy[keep]) / scale)))
    return worst


def from_description(desc):
    """Build a catalog function from a ``{"tag": ..., params}`` mapping."""
    desc = dict(desc)
    tag = desc.pop("tag", None)
    dim = int(desc.get("dim", 1))
    if tag == "Quadratic":
        return Quadratic(float(desc["b"]), dim)
    if tag == "HalfNormSq":
        return HalfNormSq(dim)
    if tag == "AbsPower":
        return AbsPower(float(desc["p"]), dim)
    if tag == "Indicator":
        return Indicator(make_set(desc["set"]))
    if tag == "Support":
        return Support(make_set(desc["set"]))
    if tag == "Zero":
        return Zero(dim)
    if tag == "PiecewiseQuadratic1D":
        dom = desc.get("domain", [-INF, INF])
        return PiecewiseQuadratic1D(desc["breakpoints"], desc["coeffs"], domain=[float(v) for v in dom])
    if tag == "PDirichletEnergy":
        return PDirichletEnergy(float(desc["p"]), int(desc["n"]), desc.get("h"))
    if tag in ("Affine", "Scaled", "Shifted"):
        base = from_description(desc["base"])
        if tag == "Scaled":
            return Scaled(base, float(desc["c"]))
        if tag == "Shifted":
            return Shifted(base, desc["a"])
        return Affine(
            base,
            scale=float(desc.get("scale", 1.0)),
            arg_scale=float(desc.get("arg_scale", 1.0)),
            shift=desc.get("shift", 0.0),
            tilt=desc.get("tilt", 0.0),
            const=float(desc.get("const", 0.0)),
        )
    if tag == "Grid":
        return GridConvexFn.from_function(
            lambda X: from_description(desc["sample"]).values(X), desc["lo"], desc["hi"], desc["n"]
        )
    raise ValueError(f"unknown function tag {tag!r}")
