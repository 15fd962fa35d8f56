"""Discrete trajectories, null-minimization functionals and flow solvers.

Three flow families are handled on a uniform mesh of ``[0, T]``:

* ``MM``:   ``u' + alpha(u) = h``,                ``u(0) = u0``
* ``DNE1``: ``w' + alpha(u) = h``, ``w in dgamma(u)``, ``w(0) = w0``
* ``DNE2``: ``alpha(u') + z = h``, ``z in dgamma(u)``, ``u(0) = u0``

Trajectories are piecewise linear; integrands are sampled at interval
midpoints. With the weights used here the discrete chain rule
``sum_k c_k <(v_{k+1} - v_k)/tau, (v_k + v_{k+1})/2> = boundary terms`` holds
exactly, so each functional equals a weighted sum of per-interval gaps
``g(v, v*) - <v, v*> >= 0``.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .convex import as_batch, as_point
from .exceptions import ConvergenceError, DimensionError
from .operators import resolvent_residual
from .representatives import default_rep, pairing, smoothed

KINDS = ("MM", "DNE1", "DNE2")


class TimeGrid:
    """Uniform mesh ``t_k = k tau`` of ``[0, T]`` with ``N`` intervals."""

    def __init__(self, T, N):
        if not T > 0:
            raise ValueError("horizon T must be positive")
        if int(N) != N or N < 2:
            raise ValueError("step count N must be an integer >= 2")
        self.T = float(T)
        self.N = int(N)
        self.tau = self.T / self.N
        self.nodes = np.linspace(0.0, self.T, self.N + 1)
        self.mids = self.nodes[:-1] + 0.5 * self.tau

    @property
    def tau_weights(self):
        return np.full(self.N, self.tau)

    @property
    def mu_weights(self):
        """Exact interval integrals of ``(T - t) dt``."""
        return self.tau * (self.T - self.nodes[:-1] - 0.5 * self.tau)

    @property
    def trap_weights(self):
        q = np.full(self.N + 1, self.tau)
        q[[0, -1]] = 0.5 * self.tau
        return q

    def refine(self):
        return TimeGrid(self.T, 2 * self.N)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.T == other.T and self.N == other.N

    def __repr__(self):
        return f"TimeGrid(T={self.T}, N={self.N})"


@dataclass
class Trajectory:
    """Nodal values ``(N+1, d)`` of a piecewise-linear path on ``grid``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.grid.N + 1:
            raise DimensionError(f"expected {self.grid.N + 1} nodes, got {vals.shape[0]}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory values must be finite")
        self.values = vals

    @classmethod
    def from_function(cls, grid, fun):
        """Sample ``fun(t)`` (returning scalars or ``(d,)`` arrays) at the nodes."""
        return cls(grid, np.array([np.atleast_1d(fun(t)) for t in grid.nodes], dtype=float))

    @classmethod
    def constant(cls, grid, c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(grid, np.tile(c, (grid.N + 1, 1)))

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def derivative(self):
        return np.diff(self.values, axis=0) / self.grid.tau

    @property
    def midpoints(self):
        return 0.5 * (self.values[:-1] + self.values[1:])

    def at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([np.interp(t, self.grid.nodes, self.values[:, i]) for i in range(self.dim)], axis=1)

    def coarsen(self):
        """Every other node (needs an even step count)."""
        if self.grid.N % 2:
            raise ValueError("coarsening needs an even number of intervals")
        return Trajectory(TimeGrid(self.grid.T, self.grid.N // 2), self.values[::2])


class Source:
    """Right-hand side ``h``: maps an array of times ``(m,)`` to values ``(m, d)``."""

    def __init__(self, fun, dim, label="custom"):
        self.fun = fun
        self.dim = int(dim)
        self.label = label

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.asarray(self.fun(t), dtype=float)
        return out.reshape(len(t), self.dim)

    @classmethod
    def zero(cls, dim=1):
        return cls(lambda t: np.zeros((len(t), dim)), dim, "zero")

    @classmethod
    def constant(cls, c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(lambda t: np.tile(c, (len(t), 1)), c.size, f"constant{c.tolist()}")

    @classmethod
    def from_scalar(cls, f, label="custom"):
        """One-dimensional source from a vectorized scalar function of ``t``."""
        return cls(lambda t: np.asarray(f(t), dtype=float).reshape(-1, 1), 1, label)

    @classmethod
    def nodal(cls, grid, values):
        """Piecewise-linear interpolation of nodal samples."""
        traj = Trajectory(grid, values)
        return cls(traj.at, traj.dim, "nodal")

    def plus(self, other, label=None):
        return Source(lambda t: self(t) + other(t), self.dim, label or f"{self.label}+{other.label}")


# ---------------------------------------------------------------------------
# Problems and functional values
# ---------------------------------------------------------------------------


@dataclass
class FlowProblem:
    """One flow instance: operator, potential (DNE kinds), data and mesh."""

    kind: str
    op: object
    grid: TimeGrid
    source: Source = None
    u0: np.ndarray = None
    w0: np.ndarray = None
    gamma: object = None
    rep: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        d = self.op.dim
        if self.source is None:
            self.source = Source.zero(d)
        if self.source.dim != d:
            raise DimensionError("source dimension differs from operator dimension")
        if self.kind == "DNE1":
            if self.w0 is None:
                raise ValueError("DNE1 needs w0")
            self.w0 = as_point(self.w0, d)
        else:
            if self.u0 is None:
                raise ValueError(f"{self.kind} needs u0")
            self.u0 = as_point(self.u0, d)
        if self.kind != "MM":
            if self.gamma is None:
                raise ValueError(f"{self.kind} needs a potential gamma")
            if self.gamma.dim != d:
                raise DimensionError("gamma dimension differs from operator dimension")
        if self.rep is None:
            self.rep = default_rep(self.op)

    @property
    def dim(self):
        return self.op.dim

    @property
    def initial(self):
        return self.w0 if self.kind == "DNE1" else self.u0

    def data_scale(self):
        hb = self.source(self.grid.mids)
        return 1.0 + float(np.abs(self.initial).max()) + float(np.abs(hb).max())

    def with_grid(self, grid):
        return replace(self, grid=grid)

    def mid_source(self):
        return self.source(self.grid.mids)

    def times(self):
        return self.grid.mids if self.op.time_dependent else None


@dataclass
class BenValue:
    """A functional value with its per-interval breakdown.

    ``per_interval`` holds weighted gaps ``c_k J_k``; ``gaps`` the unweighted
    ``J_k``. For two-block functionals ``blocks`` holds the Fenchel block
    and the representative block before the positive part.
    """

    total: float
    per_interval: np.ndarray
    pairing_part: float
    rep_part: float
    gaps: np.ndarray = None
    blocks: tuple = None

    @classmethod
    def infinite(cls, n):
        return cls(math.inf, np.full(n, math.inf), math.nan, math.inf, np.full(n, math.inf))


def _check_traj(problem, v, name="trajectory"):
    if not isinstance(v, Trajectory):
        v = Trajectory(problem.grid, v)
    if v.grid != problem.grid:
        raise DimensionError(f"{name} lives on {v.grid}, problem on {problem.grid}")
    if v.dim != problem.dim:
        raise DimensionError(f"{name} has dimension {v.dim}, problem {problem.dim}")
    return v


def _interval_values(problem, x, name):
    """Per-interval samples: midpoints of a Trajectory or an ``(N, d)`` array."""
    if isinstance(x, Trajectory):
        return _check_traj(problem, x, name).midpoints
    X = as_batch(x, problem.dim)
    if X.shape[0] != problem.grid.N:
        raise DimensionError(f"{name} needs {problem.grid.N} interval values")
    return X


def _at_start(a, b, scale):
    return np.max(np.abs(a - b)) <= 1e-12 * scale


def _rep_eval(rep, V, VS, t):
    vals = rep.evaluate(V, VS, t)
    return vals


def _mm_value(problem, rep, v, vstar, weights, weighted):
    grid = problem.grid
    v = _check_traj(problem, v)
    src = vstar if vstar is not None else problem.source
    scale = problem.data_scale() + float(np.abs(v.values).max())
    if not _at_start(v.values[0], problem.u0, scale):
        return BenValue.infinite(grid.N)
    hb = src(grid.mids)
    vb = v.midpoints
    Z = hb - v.derivative
    g = _rep_eval(rep, vb, Z, problem.times())
    gaps = g - pairing(vb, Z)
    rep_part = float(weights @ g)
    if weighted:
        boundary = 0.5 * float(grid.trap_weights @ pairing(v.values, v.values)) - 0.5 * grid.T * float(problem.u0 @ problem.u0)
    else:
        boundary = 0.5 * float(v.values[-1] @ v.values[-1]) - 0.5 * float(problem.u0 @ problem.u0)
    pairing_part = -float(weights @ pairing(hb, vb)) + boundary
    if not np.all(np.isfinite(g)):
        return BenValue(math.inf, weights * gaps, pairing_part, math.inf, gaps)
    return BenValue(rep_part + pairing_part, weights * gaps, pairing_part, rep_part, gaps)


def ben_functional(problem, v, rep=None, vstar=None):
    """``sum tau [g(v_mid, h_mid - v') - <h_mid, v_mid>] + |v_N|^2/2 - |u0|^2/2``.

    ``+inf`` unless ``v`` starts at ``u0``.
    """
    _need(problem, "MM")
    return _mm_value(problem, rep or problem.rep, v, vstar, problem.grid.tau_weights, weighted=False)


def ben_weighted_functional(problem, v, rep=None, vstar=None):
    """Time-integrated variant with exact ``(T - t) dt`` interval weights and
    boundary term ``(1/2) int |v|^2 dt - (T/2) |u0|^2`` (trapezoid rule)."""
    _need(problem, "MM")
    return _mm_value(problem, rep or problem.rep, v, vstar, problem.grid.mu_weights, weighted=True)


def _need(problem, kind):
    if problem.kind != kind:
        raise ValueError(f"expected a {kind} problem, got {problem.kind}")


def _fenchel_block(gamma, U, W, weights):
    a = gamma.values(U)
    b = gamma.conjugate().values(W)
    gap = a + b - pairing(U, W)
    return float(weights @ gap), gap


def dne1_functional(problem, u, w, rep=None, vstar=None):
    """Two-block functional of the type-I doubly nonlinear flow.

    ``u`` may be a Trajectory (midpoints are used) or ``(N, d)`` interval
    values; ``w`` is a Trajectory starting at ``w0``.
    """
    _need(problem, "DNE1")
    rep = rep or problem.rep
    grid = problem.grid
    w = _check_traj(problem, w, "w")
    U = _interval_values(problem, u, "u")
    scale = problem.data_scale() + float(np.abs(w.values).max())
    if not _at_start(w.values[0], problem.w0, scale):
        return BenValue.infinite(grid.N)
    c = grid.mu_weights
    hb = (vstar or problem.source)(grid.mids)
    b1, gap1 = _fenchel_block(problem.gamma, U, w.midpoints, c)
    Z = hb - w.derivative
    g = _rep_eval(rep, U, Z, problem.times())
    gaps = g - pairing(U, Z)
    gs = problem.gamma.conjugate()
    boundary = float(grid.trap_weights @ gs.values(w.values)) - grid.T * gs(problem.w0)
    rep_part = float(c @ g)
    pairing_part = -float(c @ pairing(hb, U)) + boundary
    b2 = rep_part + pairing_part
    total = b1 + max(b2, 0.0)
    return BenValue(total, c * (gap1 + gaps), pairing_part, rep_part, gaps, (b1, b2))


def dne2_functional(problem, u, z, rep=None, vstar=None):
    """Two-block functional of the type-II doubly nonlinear flow.

    ``u`` is a Trajectory starting at ``u0``; ``z`` is a Trajectory
    (midpoints used) or ``(N, d)`` interval values.
    """
    _need(problem, "DNE2")
    rep = rep or problem.rep
    grid = problem.grid
    u = _check_traj(problem, u, "u")
    Z = _interval_values(problem, z, "z")
    scale = problem.data_scale() + float(np.abs(u.values).max())
    if not _at_start(u.values[0], problem.u0, scale):
        return BenValue.infinite(grid.N)
    c = grid.mu_weights
    hb = (vstar or problem.source)(grid.mids)
    b1, gap1 = _fenchel_block(problem.gamma, u.midpoints, Z, c)
    D = u.derivative
    S = hb - Z
    g = _rep_eval(rep, D, S, problem.times())
    gaps = g - pairing(D, S)
    boundary = float(grid.trap_weights @ problem.gamma.values(u.values)) - grid.T * problem.gamma(problem.u0)
    rep_part = float(c @ g)
    pairing_part = -float(c @ pairing(hb, D)) + boundary
    b2 = rep_part + pairing_part
    total = b1 + max(b2, 0.0)
    return BenValue(total, c * (gap1 + gaps), pairing_part, rep_part, gaps, (b1, b2))


def evaluate_functional(problem, solution, rep=None, weighted=False):
    """The kind-appropriate functional at a solution's trajectories."""
    if problem.kind == "MM":
        fn = ben_weighted_functional if weighted else ben_functional
        return fn(problem, solution.u, rep)
    if problem.kind == "DNE1":
        return dne1_functional(problem, solution.u, solution.aux, rep)
    return dne2_functional(problem, solution.u, solution.aux, rep)


# ---------------------------------------------------------------------------
# Weighted pairing
# ---------------------------------------------------------------------------


def _pairing_identity(v):
    g = v.grid
    return 0.5 * float(g.trap_weights @ pairing(v.values, v.values)) - 0.5 * g.T * float(v.values[0] @ v.values[0])


def _pairing_direct(v):
    # exact integral of <v', v>(T - t) for the piecewise-linear interpolant
    g = v.grid
    d = v.derivative
    w = g.mu_weights
    return float(w @ pairing(d, v.midpoints)) - g.tau**3 / 12.0 * float(np.sum(d * d))


def weighted_pairing(v, route="identity", richardson=False):
    """Discrete ``int_0^T <v', v> (T - t) dt``.

    ``route="identity"`` uses ``(1/2) int |v|^2 dt - (T/2)|v(0)|^2`` with the
    trapezoid rule; ``route="direct"`` integrates the piecewise-linear
    interpolant interval by interval. ``richardson=True`` combines the value on
    ``v``'s grid with the value on the coarsened grid, removing the
    ``O(tau^2)`` term.
    """
    fn = {"identity": _pairing_identity, "direct": _pairing_direct}[route]
    fine = fn(v)
    if not richardson:
        return fine
    coarse = fn(v.coarsen())
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# Reference (resolvent) solvers
# ---------------------------------------------------------------------------


@dataclass
class FlowSolution:
    """Solution trajectories; ``aux`` is ``w`` (DNE1) or ``z`` (DNE2)."""

    kind: str
    u: Trajectory
    aux: Trajectory = None
    residual: float = 0.0
    meta: dict = field(default_factory=dict)


def _solve_monotone_scalar(lo_hi, r, x0=0.0, tol=1e-13, max_iter=400):
    """Root ``x`` of ``r in F(x)`` for a monotone set-valued scalar map.

    ``lo_hi(x)`` returns the interval hull ``(lo, hi)`` of ``F(x)``.
    """
    def side(x):
        lo, hi = lo_hi(x)
        if lo > r:
            return 1
        if hi < r:
            return -1
        return 0

    s0 = side(x0)
    if s0 == 0:
        return x0
    step = 1.0
    a = x0
    b = x0 - s0 * step
    while side(b) == s0:
        a = b
        step *= 2.0
        b = x0 - s0 * step
        if step > 1e12:
            raise ConvergenceError("could not bracket scalar monotone root")
    lo, hi = min(a, b), max(a, b)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = side(mid)
        if s == 0:
            return mid
        if s > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _hull(selections):
    S = np.array(selections, dtype=float).reshape(len(selections), -1)
    return float(S.min()), float(S.max())


def _mod(gamma):
    return getattr(gamma, "modulus", None)


def solve_reference(problem):
    """Implicit (resolvent) time stepping; records the max per-step residual."""
    grid, op, tau = problem.grid, problem.op, problem.grid.tau
    H = problem.source(grid.nodes)
    t_of = (lambda k: grid.nodes[k]) if op.time_dependent else (lambda k: None)
    N, d = grid.N, problem.dim
    U = np.empty((N + 1, d))
    worst = 0.0
    if problem.kind == "MM":
        U[0] = problem.u0
        for k in range(N):
            rhs = U[k] + tau * H[k + 1]
            U[k + 1] = op.resolvent(tau, rhs, t_of(k + 1))
            worst = max(worst, _residual(op, tau, rhs, U[k + 1], t_of(k + 1)))
        return FlowSolution("MM", Trajectory(grid, U), residual=worst)

    gamma = problem.gamma
    m = _mod(gamma)
    if problem.kind == "DNE1":
        W = np.empty((N + 1, d))
        W[0] = problem.w0
        U[0] = gamma.conjugate().gradient(problem.w0[None])[0]
        for k in range(N):
            r = W[k] + tau * H[k + 1]
            if m is not None:
                U[k + 1] = op.resolvent(tau / m, r / m, t_of(k + 1))
                W[k + 1] = m * U[k + 1]
            else:
                U[k + 1], W[k + 1] = _dne1_step_scalar(op, gamma, tau, r, U[k], t_of(k + 1))
            # residual of w + tau alpha(u) containing r, and of w in dgamma(u)
            res = _residual(op, tau, r, W[k + 1], t_of(k + 1), at=U[k + 1])
            lo, hi = _hull(gamma.subdifferential(U[k + 1]).slopes)
            res = max(res, max(lo - W[k + 1].max(), W[k + 1].min() - hi, 0.0))
            worst = max(worst, res)
        return FlowSolution("DNE1", Trajectory(grid, U), Trajectory(grid, W), residual=worst)

    Z = np.empty((N + 1, d))
    U[0] = problem.u0
    Z[0] = gamma.gradient(problem.u0[None])[0]
    for k in range(N):
        h = H[k + 1]
        if m is not None:
            D = op.resolvent(1.0 / (m * tau), (h - m * U[k]) / (m * tau), t_of(k + 1))
            U[k + 1] = U[k] + tau * D
            Z[k + 1] = m * U[k + 1]
        else:
            D, Z[k + 1] = _dne2_step_scalar(op, gamma, tau, h, U[k], t_of(k + 1))
            U[k + 1] = U[k] + tau * D
        sel = np.array(op.apply(D, t_of(k + 1)))
        target = h - Z[k + 1]
        res = float(np.linalg.norm(target - np.clip(target, sel.min(axis=0), sel.max(axis=0))))
        worst = max(worst, res)
    return FlowSolution("DNE2", Trajectory(grid, U), Trajectory(grid, Z), residual=worst)


def _residual(op, tau, rhs, x, t, at=None):
    """Distance of ``(rhs - x)/tau`` to ``alpha(at)`` (``at`` defaults to ``x``)."""
    if at is None:
        return resolvent_residual(op, tau, rhs, x, t)
    target = (as_point(rhs, op.dim) - x) / tau
    sel = np.array(op.apply(at, t))
    return float(np.linalg.norm(target - np.clip(target, sel.min(axis=0), sel.max(axis=0))))


def _dne1_step_scalar(op, gamma, tau, r, u_prev, t):
    if op.dim != 1:
        raise NotImplementedError("non-quadratic gamma is supported for d = 1 only")

    def lo_hi(x):
        a = _hull(gamma.subdifferential([x]).slopes)
        b = _hull(op.apply([x], t))
        return a[0] + tau * b[0], a[1] + tau * b[1]

    x = _solve_monotone_scalar(lo_hi, float(r[0]), x0=float(u_prev[0]))
    glo, ghi = _hull(gamma.subdifferential([x]).slopes)
    alo, ahi = _hull(op.apply([x], t))
    w = float(np.clip(r[0] - tau * 0.5 * (alo + ahi), glo, ghi))
    w = float(np.clip(w, r[0] - tau * ahi, r[0] - tau * alo))
    return np.array([x]), np.array([w])


def _dne2_step_scalar(op, gamma, tau, h, u_prev, t):
    if op.dim != 1:
        raise NotImplementedError("non-quadratic gamma is supported for d = 1 only")

    def lo_hi(x):
        a = _hull(op.apply([x], t))
        b = _hull(gamma.subdifferential(u_prev + tau * x).slopes)
        return a[0] + b[0], a[1] + b[1]

    x = _solve_monotone_scalar(lo_hi, float(h[0]))
    glo, ghi = _hull(gamma.subdifferential(u_prev + tau * x).slopes)
    alo, ahi = _hull(op.apply([x], t))
    z = float(np.clip(h[0] - 0.5 * (alo + ahi), glo, ghi))
    z = float(np.clip(z, h[0] - ahi, h[0] - alo))
    return np.array([x]), np.array([z])


# ---------------------------------------------------------------------------
# Null-minimization
# ---------------------------------------------------------------------------


def _rev_tail(A):
    """``S_k = sum_{j > k} A_j`` along axis 0."""
    S = np.zeros_like(A)
    S[:-1] = np.cumsum(A[::-1], axis=0)[::-1][1:]
    return S


def _project_second(rep, S):
    return rep.project(np.zeros_like(S), S)[1]


class _MMObjective:
    """``sum_k c_k J(v_mid_k, z_k)`` in the variable ``z_k = h_mid_k - v'_k``."""

    def __init__(self, problem, rep, weighted):
        self.p = problem
        self.rep = rep
        g = problem.grid
        self.tau = g.tau
        self.c = g.mu_weights if weighted else g.tau_weights
        self.hb = problem.mid_source()
        self.t = problem.times()
        self.shape = (g.N, problem.dim)
        self.smooth = rep.smooth

    def initial(self):
        return self.hb.copy()

    def project(self, Z):
        return _project_second(self.rep, Z)

    def path(self, Z):
        D = self.hb - Z
        V = np.vstack([self.p.u0, self.p.u0 + self.tau * np.cumsum(D, axis=0)])
        return V, V[:-1] + 0.5 * self.tau * D

    def value(self, Z):
        _, Vb = self.path(Z)
        g = self.rep.evaluate(Vb, Z, self.t)
        if not np.all(np.isfinite(g)):
            return math.inf
        return float(self.c @ (g - pairing(Vb, Z)))

    def value_grad(self, Z):
        _, Vb = self.path(Z)
        g = self.rep.evaluate(Vb, Z, self.t)
        if not np.all(np.isfinite(g)):
            return math.inf, None
        gv, gs = self.rep.grad(Vb, Z, self.t)
        A = self.c[:, None] * (gv - Z)
        G = self.c[:, None] * (gs - Vb) - self.tau * (0.5 * A + _rev_tail(A))
        return float(self.c @ (g - pairing(Vb, Z))), G

    def solution(self, Z):
        V, _ = self.path(Z)
        return FlowSolution("MM", Trajectory(self.p.grid, V))


class _Kinked:
    """Positive part ``max(b, 0)``, or its softplus smoothing of width ``kink``."""

    kink = None

    def _pos(self, b):
        if self.kink is None:
            return max(b, 0.0), (1.0 if b > 0 else 0.0)
        e = self.kink
        return e * float(np.logaddexp(0.0, b / e)), float(0.5 * (1.0 + np.tanh(0.5 * b / e)))


class _DNE1Objective(_Kinked):
    """Variables ``(u_k, zeta_k)`` with ``w' = h_mid - zeta``."""

    def __init__(self, problem, rep, kink=None):
        self.kink = kink
        self.p = problem
        self.rep = rep
        g = problem.grid
        self.tau, self.T = g.tau, g.T
        self.c = g.mu_weights
        self.q = g.trap_weights
        self.hb = problem.mid_source()
        self.t = problem.times()
        self.gam = problem.gamma
        self.gs = problem.gamma.conjugate()
        self.N, self.d = g.N, problem.dim
        self.shape = (2 * g.N, problem.dim)
        self.smooth = rep.smooth and self.gam.smooth and self.gs.smooth
        self.const = self.T * self.gs(problem.w0)

    def initial(self):
        u = self.gs.gradient(self.p.w0[None])[0]
        return np.vstack([np.tile(u, (self.N, 1)), self.hb])

    def project(self, X):
        U, Zt = X[: self.N], X[self.N :]
        return np.vstack([self.gam.project_domain(U), _project_second(self.rep, Zt)])

    def path(self, Zt):
        D = self.hb - Zt
        W = np.vstack([self.p.w0, self.p.w0 + self.tau * np.cumsum(D, axis=0)])
        return W, W[:-1] + 0.5 * self.tau * D

    def _parts(self, X):
        U, Zt = X[: self.N], X[self.N :]
        W, Wb = self.path(Zt)
        gw = self.gs.values(Wb)
        b1 = float(self.c @ (self.gam.values(U) + gw - pairing(Wb, U)))
        g = self.rep.evaluate(U, Zt, self.t)
        b2 = float(self.c @ (g - pairing(self.hb, U))) + float(self.q @ self.gs.values(W)) - self.const
        return U, Zt, W, Wb, b1, b2, g

    def value(self, X):
        *_, b1, b2, g = self._parts(X)
        if not (math.isfinite(b1) and np.all(np.isfinite(g))):
            return math.inf
        return b1 + self._pos(b2)[0]

    def value_grad(self, X):
        U, Zt, W, Wb, b1, b2, g = self._parts(X)
        if not (math.isfinite(b1) and np.all(np.isfinite(g))):
            return math.inf, None
        pos, s = self._pos(b2)
        c = self.c[:, None]
        gv, gs = self.rep.grad(U, Zt, self.t)
        GU = c * (self.gam.gradient(U) - Wb) + s * c * (gv - self.hb)
        A = c * (self.gs.gradient(Wb) - U)
        B = s * self.q[1:, None] * self.gs.gradient(W[1:])
        # d w_j / d zeta_k = -tau for j >= k + 1
        tailB = np.cumsum(B[::-1], axis=0)[::-1]
        GZ = s * c * gs - self.tau * (0.5 * A + _rev_tail(A)) - self.tau * tailB
        return b1 + pos, np.vstack([GU, GZ])

    def solution(self, X):
        U, Zt = X[: self.N], X[self.N :]
        W, _ = self.path(Zt)
        # nodal u from interval values: start at dgamma*(w0), then the interval midpoints
        u0 = self.gs.gradient(self.p.w0[None])[0]
        nodes = _nodes_from_midpoints(u0, U)
        return FlowSolution("DNE1", Trajectory(self.p.grid, nodes), Trajectory(self.p.grid, W), meta={"u_interval": U})


def _nodes_from_midpoints(x0, M):
    """Nodal path whose interval midpoints are ``M`` and first node ``x0``."""
    X = np.empty((len(M) + 1, M.shape[1]))
    X[0] = x0
    for k in range(len(M)):
        X[k + 1] = 2 * M[k] - X[k]
    return X


class _DNE2Objective(_Kinked):
    """Variables ``(d_k, z_k)`` with ``u' = d``."""

    def __init__(self, problem, rep, kink=None):
        self.kink = kink
        self.p = problem
        self.rep = rep
        g = problem.grid
        self.tau, self.T = g.tau, g.T
        self.c = g.mu_weights
        self.q = g.trap_weights
        self.hb = problem.mid_source()
        self.t = problem.times()
        self.gam = problem.gamma
        self.gs = problem.gamma.conjugate()
        self.N, self.d = g.N, problem.dim
        self.shape = (2 * g.N, problem.dim)
        self.smooth = rep.smooth and self.gam.smooth and self.gs.smooth
        self.const = self.T * self.gam(problem.u0)

    def initial(self):
        z = self.gam.gradient(self.p.u0[None])[0]
        return np.vstack([np.zeros((self.N, self.d)), np.tile(z, (self.N, 1))])

    def project(self, X):
        D, Z = X[: self.N], X[self.N :]
        Z = self.gs.project_domain(Z)
        Z = self.hb - _project_second(self.rep, self.hb - Z)
        return np.vstack([D, Z])

    def path(self, D):
        U = np.vstack([self.p.u0, self.p.u0 + self.tau * np.cumsum(D, axis=0)])
        return U, U[:-1] + 0.5 * self.tau * D

    def _parts(self, X):
        D, Z = X[: self.N], X[self.N :]
        U, Ub = self.path(D)
        b1 = float(self.c @ (self.gam.values(Ub) + self.gs.values(Z) - pairing(Z, Ub)))
        S = self.hb - Z
        g = self.rep.evaluate(D, S, self.t)
        b2 = float(self.c @ (g - pairing(self.hb, D))) + float(self.q @ self.gam.values(U)) - self.const
        return D, Z, U, Ub, S, b1, b2, g

    def value(self, X):
        *_, b1, b2, g = self._parts(X)
        if not (math.isfinite(b1) and np.all(np.isfinite(g))):
            return math.inf
        return b1 + self._pos(b2)[0]

    def value_grad(self, X):
        D, Z, U, Ub, S, b1, b2, g = self._parts(X)
        if not (math.isfinite(b1) and np.all(np.isfinite(g))):
            return math.inf, None
        pos, s = self._pos(b2)
        c = self.c[:, None]
        gv, gs = self.rep.grad(D, S, self.t)
        GZ = c * (self.gs.gradient(Z) - Ub) - s * c * gs
        A = c * (self.gam.gradient(Ub) - Z)
        B = s * self.q[1:, None] * self.gam.gradient(U[1:])
        tailB = np.cumsum(B[::-1], axis=0)[::-1]
        GD = s * c * (gv - self.hb) + self.tau * (0.5 * A + _rev_tail(A)) + self.tau * tailB
        return b1 + pos, np.vstack([GD, GZ])

    def solution(self, X):
        D, Z = X[: self.N], X[self.N :]
        U, _ = self.path(D)
        z0 = self.gam.gradient(self.p.u0[None])[0]
        return FlowSolution("DNE2", Trajectory(self.p.grid, U), Trajectory(self.p.grid, _nodes_from_midpoints(z0, Z)), meta={"z_interval": Z})


@dataclass
class OptimizerConfig:
    """Stopping and step rules of the null-minimization solver.

    ``tol_abs`` defaults to ``tol_factor * (1 + data scale) * tau``.
    """

    tol_abs: float = None
    tol_factor: float = 1e-4
    tol_rel: float = 1e-8
    patience: int = 50
    max_iter: int = 200_000
    weighted: bool = False
    method: str = "auto"


@dataclass
class NullMinResult:
    solution: FlowSolution
    value: BenValue
    iterations: int
    converged: bool
    message: str
    tol_abs: float
    history: list = field(default_factory=list, repr=False)
    seconds: float = 0.0

    @property
    def u(self):
        return self.solution.u

    @property
    def aux(self):
        return self.solution.aux


def _fista(obj, x, cfg, tol, check=None):
    """Projected FISTA with backtracking and function-value restart.

    ``check(x)`` (optional) is an extra stopping test on accepted iterates.
    """
    f, g = obj.value_grad(x)
    hist = [f]
    if f <= tol or (check is not None and check(x)):
        return x, f, 1, True, "tolerance reached", hist
    y, fy, gy = x, f, g
    L = max(1.0, float(np.abs(g).max()))
    t = 1.0
    for it in range(1, cfg.max_iter + 1):
        while True:
            xn = obj.project(y - gy / L)
            fn = obj.value(xn)
            diff = xn - y
            if fn <= fy + float(np.sum(gy * diff)) + 0.5 * L * float(np.sum(diff * diff)) + 1e-15 * abs(fy):
                break
            L *= 2.0
            if L > 1e30:
                return x, f, it, False, "line search failed", hist
        if fn > f:
            # restart from the last accepted point without momentum
            t = 1.0
            y, fy, gy = x, f, g
            if np.array_equal(xn, x) or np.max(np.abs(xn - x)) == 0:
                return x, f, it, f <= tol, "stalled", hist
            continue
        fn, gn = obj.value_grad(xn)
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = obj.project(xn + ((t - 1.0) / tn) * (xn - x))
        x, f, g, t = xn, fn, gn, tn
        fy, gy = obj.value_grad(y)
        if gy is None:
            y, fy, gy, t = x, f, g, 1.0
        L /= 1.1
        hist.append(f)
        if f <= tol or (check is not None and check(x)):
            return x, f, it, True, "tolerance reached", hist
        if _stagnated(hist, cfg):
            return x, f, it, False, "relative decrease below tol_rel over patience window", hist
    return x, f, cfg.max_iter, False, "iteration cap", hist


def _continuation(make_obj, exact, x, cfg, tol, eps0=1e-1, eps_min=1e-12, shrink=0.1):
    """FISTA on Moreau-smoothed objectives with decreasing width.

    Each stage warm-starts from the previous one; the exact functional at the
    projected iterate decides termination.
    """
    check = lambda y: exact.value(exact.project(y)) <= tol  # noqa: E731
    used, hist, eps = 0, [], eps0
    while True:
        stage = replace(cfg, max_iter=max(cfg.max_iter - used, 1), tol_rel=max(cfg.tol_rel, 1e-6), patience=min(cfg.patience, 20))
        x, _, it, _, _, _ = _fista(make_obj(eps), x, stage, -math.inf, check=check)
        used += it
        xp = exact.project(x)
        fx = exact.value(xp)
        hist.append(fx)
        if fx <= tol:
            return xp, fx, used, True, f"tolerance reached (smoothing width {eps:.1e})", hist
        if eps * shrink < eps_min or used >= cfg.max_iter:
            return xp, fx, used, False, f"continuation exhausted at width {eps:.1e}", hist
        eps *= shrink


def _polyak(obj, x, cfg, tol):
    """Projected subgradient steps with Polyak step size (the minimum is 0)."""
    f, g = obj.value_grad(x)
    hist = [f]
    best_x, best_f = x, f
    if f <= tol:
        return x, f, 1, True, "tolerance reached", hist
    for it in range(1, cfg.max_iter + 1):
        gg = float(np.sum(g * g))
        if gg == 0.0:
            return best_x, best_f, it, best_f <= tol, "zero subgradient", hist
        x = obj.project(x - (f / gg) * g)
        f, g = obj.value_grad(x)
        if g is None:
            return best_x, best_f, it, False, "left the domain", hist
        if f < best_f:
            best_x, best_f = x, f
        hist.append(best_f)
        if best_f <= tol:
            return best_x, best_f, it, True, "tolerance reached", hist
        if _stagnated(hist, cfg):
            return best_x, best_f, it, False, "relative decrease below tol_rel over patience window", hist
    return best_x, best_f, cfg.max_iter, False, "iteration cap", hist


def _stagnated(hist, cfg):
    p = cfg.patience
    if len(hist) <= p:
        return False
    old = min(hist[: -p])
    new = min(hist[-p:])
    return old - new <= cfg.tol_rel * max(abs(old), 1e-300)


def _objective_factory(problem, cfg):
    if problem.kind == "MM":
        return lambda rep, kink=None: _MMObjective(problem, rep, cfg.weighted)
    if problem.kind == "DNE1":
        return lambda rep, kink=None: _DNE1Objective(problem, rep, kink)
    return lambda rep, kink=None: _DNE2Objective(problem, rep, kink)


def _pick_method(problem, obj, rep):
    smoothable = obj.smooth or smoothed(rep, 1.0) is not None
    if problem.kind == "MM":
        if obj.smooth or rep.differentiable:
            return "fista"
        return "smoothing" if smoothable else "polyak"
    # the positive part of the second block is always smoothed for DNE kinds
    if smoothable and obj.gam.smooth and obj.gs.smooth:
        return "smoothing"
    return "polyak"


def solve_null_min(problem, rep=None, config=None):
    """Minimize the problem's functional from the constant initial trajectory."""
    cfg = config or OptimizerConfig()
    rep = rep or problem.rep
    start = time.perf_counter()
    make = _objective_factory(problem, cfg)
    obj = make(rep)
    tol = cfg.tol_abs if cfg.tol_abs is not None else cfg.tol_factor * problem.data_scale() * problem.grid.tau
    method = _pick_method(problem, obj, rep) if cfg.method == "auto" else cfg.method
    if method == "polyak" and cfg.tol_abs is None:
        # subgradient steps on polyhedral blocks converge slowly; relax the default
        tol *= 2.0

    def smoothed_obj(eps):
        r = rep if rep.smooth else smoothed(rep, eps)
        return make(r, eps * problem.data_scale() if problem.kind != "MM" else None)

    x0 = obj.project(obj.initial())
    if method == "fista":
        x, f, it, ok, msg, hist = _fista(obj, x0, cfg, tol)
    elif method == "smoothing":
        x, f, it, ok, msg, hist = _continuation(smoothed_obj, obj, x0, cfg, tol)
    elif method == "polyak":
        x, f, it, ok, msg, hist = _polyak(obj, x0, cfg, tol)
    else:
        raise ValueError(f"unknown optimizer method {method!r}")
    sol = obj.solution(x)
    if problem.kind == "MM":
        val = (ben_weighted_functional if cfg.weighted else ben_functional)(problem, sol.u, rep)
    elif problem.kind == "DNE1":
        val = dne1_functional(problem, sol.meta["u_interval"], sol.aux, rep)
    else:
        val = dne2_functional(problem, sol.u, sol.meta["z_interval"], rep)
    sol.meta["method"] = method
    return NullMinResult(sol, val, it, ok, msg, tol, hist, time.perf_counter() - start)


def relative_l2(a, b, grid=None):
    """Relative L2-in-time distance between nodal arrays (trapezoid rule)."""
    A = a.values if isinstance(a, Trajectory) else np.asarray(a, dtype=float).reshape(len(a), -1)
    B = b.values if isinstance(b, Trajectory) else np.asarray(b, dtype=float).reshape(len(b), -1)
    if grid is None:
        grid = a.grid if isinstance(a, Trajectory) else b.grid
    q = grid.trap_weights
    num = math.sqrt(float(q @ np.sum((A - B) ** 2, axis=1)))
    den = math.sqrt(float(q @ np.sum(B**2, axis=1)))
    return num / den if den > 0 else num


def stopping_time(traj, tol=None):
    """First node time after which ``|u|`` stays at most ``tol`` (default ``tau/2``).

    Returns ``inf`` if the trajectory never comes to rest.
    """
    grid = traj.grid
    tol = 0.5 * grid.tau if tol is None else tol
    small = np.linalg.norm(traj.values, axis=1) <= tol
    # nodes k such that all later nodes are small
    rest = np.flip(np.logical_and.accumulate(np.flip(small)))
    if not rest.any():
        return math.inf
    return float(grid.nodes[int(np.argmax(rest))])
