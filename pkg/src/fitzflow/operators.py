"""Multi-valued monotone operators on R^d with graph sampling and resolvents."""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .convex import (
    AbsPower,
    ExtConvexFn,
    HalfNormSq,
    PDirichletEnergy,
    Quadratic,
    as_point,
    from_description as function_from_description,
)
from .exceptions import DimensionError, ImproperFunctionError, NonConvexError, NotMaximalError

MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class Bounds:
    """Witness constants: ``<v*, v> >= C1|v|^2 - C2`` and ``|v*| <= C3|v| + C4``.

    ``None`` marks a bound that does not hold for the operator.
    """

    C1: float = None
    C2: float = None
    C3: float = None
    C4: float = None

    def scaled(self, c):
        mul = lambda x: None if x is None else c * x  # noqa: E731
        return Bounds(mul(self.C1), mul(self.C2), mul(self.C3), mul(self.C4))


class MonotoneOp:
    """Base class. ``apply`` returns a finite list of selections of ``alpha(v)``."""

    dim = 1
    maximal = True
    time_dependent = False
    bounds = Bounds()

    def apply(self, v, t=None):
        raise NotImplementedError

    def resolvent(self, tau, rhs, t=None):
        """The unique ``x`` with ``x + tau * alpha(x)`` containing ``rhs``."""
        raise NotImplementedError

    def linear_matrix(self):
        """Matrix of the operator if it is linear, else ``None``."""
        return None

    def describe(self):
        raise NotImplementedError

    def __repr__(self):
        d = self.describe()
        params = ", ".join(f"{k}={v!r}" for k, v in d.items() if k != "tag")
        return f"{d['tag']}({params})"

    def _check_time(self, t):
        if self.time_dependent and t is None:
            raise ValueError(f"{self!r} needs a time argument")

    def _check_tau(self, tau):
        if not tau > 0:
            raise ValueError("resolvent step must be positive")


class LinearSPD(MonotoneOp):
    """``v -> A v`` with ``A`` symmetric positive semidefinite."""

    def __init__(self, A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionError("LinearSPD needs a square matrix")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * (1 + np.abs(A).max())):
            raise NonConvexError("LinearSPD matrix is not symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig[0] < -1e-12 * (1 + abs(eig[-1])):
            raise NonConvexError("LinearSPD matrix is not positive semidefinite")
        self.A = A
        self.dim = A.shape[0]
        self.bounds = Bounds(max(eig[0], 0.0), 0.0, float(eig[-1]), 0.0)

    def apply(self, v, t=None):
        return [self.A @ as_point(v, self.dim)]

    def resolvent(self, tau, rhs, t=None):
        self._check_tau(tau)
        return np.linalg.solve(np.eye(self.dim) + tau * self.A, as_point(rhs, self.dim))

    def linear_matrix(self):
        return self.A

    def describe(self):
        return {"tag": "LinearSPD", "A": self.A.tolist()}


class Identity(LinearSPD):
    """The identity map."""

    def __init__(self, dim=1):
        super().__init__(np.eye(dim))

    def resolvent(self, tau, rhs, t=None):
        self._check_tau(tau)
        return as_point(rhs, self.dim) / (1.0 + tau)

    def describe(self):
        return {"tag": "Identity", "dim": self.dim}


class Subdifferential(MonotoneOp):
    """``v -> d phi(v)``; empty where ``phi`` is infinite."""

    def __init__(self, phi):
        if not isinstance(phi, ExtConvexFn):
            raise TypeError("Subdifferential needs an ExtConvexFn")
        self.phi = phi
        self.dim = phi.dim
        self.bounds = _potential_bounds(phi)

    def apply(self, v, t=None):
        v = as_point(v, self.dim)
        if self.phi(v) == np.inf:
            return []
        return [np.asarray(s, dtype=float) for s in self.phi.subdifferential(v).slopes]

    def resolvent(self, tau, rhs, t=None):
        self._check_tau(tau)
        return self.phi.prox(tau, as_point(rhs, self.dim))

    def linear_matrix(self):
        m = getattr(self.phi, "modulus", None)
        if m is not None:
            return m * np.eye(self.dim)
        if isinstance(self.phi, PDirichletEnergy) and self.phi.p == 2:
            return self.phi.matrix()
        return None

    def describe(self):
        return {"tag": "Subdifferential", "phi": self.phi.describe()}


def _potential_bounds(phi):
    if isinstance(phi, HalfNormSq):
        return Bounds(1.0, 0.0, 1.0, 0.0)
    if isinstance(phi, Quadratic):
        return Bounds(2 * phi.b, 0.0, 2 * phi.b, 0.0)
    if isinstance(phi, AbsPower):
        p = phi.p
        if p == 2:
            return Bounds(1.0, 0.0, 1.0, 0.0)
        # |v|^p >= |v|^2 - C2 for p > 2, maximal gap at |v|^(p-2) = 2/p
        if p > 2:
            s = (2.0 / p) ** (1.0 / (p - 2.0))
            return Bounds(1.0, s**2 - s**p, None, None)
        # p < 2: sublinear growth |v|^(p-1) <= |v| + 1
        return Bounds(None, None, 1.0, 1.0)
    if isinstance(phi, PDirichletEnergy):
        return _dirichlet_bounds(phi)
    return Bounds()


def _dirichlet_bounds(phi):
    lam = np.linalg.eigvalsh(phi.matrix())
    lmin, lmax = float(lam[0]), float(lam[-1])
    p = phi.p
    if p == 2:
        return Bounds(lmin, 0.0, lmax, 0.0)
    # <v*, v> = |Dv|_p^p >= (n+1)^(1-p/2) |Dv|_2^p >= a |v|^p with a below
    a = (phi.n + 1) ** (1 - p / 2) * lmin ** (p / 2)
    s = (2.0 / (a * p)) ** (2.0 / (p - 2.0))
    return Bounds(1.0, max(s - a * s ** (p / 2), 0.0), None, None)


class Sign1D(MonotoneOp):
    """``v -> sign(v)`` with ``sign(0) = [-1, 1]``."""

    dim = 1
    bounds = Bounds(None, None, 0.0, 1.0)

    def apply(self, v, t=None):
        x = float(as_point(v, 1)[0])
        if x > 0:
            return [np.array([1.0])]
        if x < 0:
            return [np.array([-1.0])]
        return [np.array([s]) for s in (-1.0, 0.0, 1.0)]

    def resolvent(self, tau, rhs, t=None):
        self._check_tau(tau)
        r = float(as_point(rhs, 1)[0])
        return np.array([np.sign(r) * max(abs(r) - tau, 0.0)])

    def describe(self):
        return {"tag": "Sign1D"}


class GraphSampled(MonotoneOp):
    """Operator given by finitely many graph pairs (not maximal)."""

    maximal = False

    def __init__(self, sample):
        self.sample = sample
        self.dim = sample.dim

    def apply(self, v, t=None):
        v = as_point(v, self.dim)
        hit = np.all(np.abs(self.sample.v - v) <= 1e-12 * (1 + np.abs(v).max()), axis=1)
        return [row.copy() for row in self.sample.vstar[hit]]

    def resolvent(self, tau, rhs, t=None):
        raise NotMaximalError("a finitely sampled graph has no resolvent")

    def describe(self):
        return {"tag": "GraphSampled", "pairs": len(self.sample.v)}


class OnlyAtZero(MonotoneOp):
    """``alpha(0) = {0}`` and empty elsewhere: monotone, not maximal."""

    maximal = False

    def __init__(self, dim=1):
        self.dim = int(dim)

    def apply(self, v, t=None):
        v = as_point(v, self.dim)
        return [np.zeros(self.dim)] if not np.any(v) else []

    def resolvent(self, tau, rhs, t=None):
        raise NotMaximalError("OnlyAtZero is not maximal monotone")

    def describe(self):
        return {"tag": "OnlyAtZero", "dim": self.dim}


class PLaplacian1D(Subdifferential):
    """Finite-difference ``-(|u'|^(p-2) u')'`` on ``N`` interior nodes with zero ends."""

    def __init__(self, p, N, h=None):
        super().__init__(PDirichletEnergy(p, N, h))
        self.p, self.N = self.phi.p, self.phi.n

    def describe(self):
        return {"tag": "PLaplacian1D", "p": self.p, "N": self.N, "h": self.phi.h}


class Scaled(MonotoneOp):
    """``v -> c * alpha(v)`` with ``c > 0``."""

    def __init__(self, op, c):
        if not c > 0:
            raise ValueError("scale must be positive")
        self.op = op
        self.c = float(c)
        self.dim = op.dim
        self.maximal = op.maximal
        self.time_dependent = op.time_dependent
        self.bounds = op.bounds.scaled(self.c)

    def apply(self, v, t=None):
        return [self.c * s for s in self.op.apply(v, t)]

    def resolvent(self, tau, rhs, t=None):
        self._check_tau(tau)
        return self.op.resolvent(tau * self.c, rhs, t)

    def linear_matrix(self):
        A = self.op.linear_matrix()
        return None if A is None else self.c * A

    def describe(self):
        return {"tag": "Scaled", "op": self.op.describe(), "c": self.c}


class Shifted(MonotoneOp):
    """``v -> alpha(v - arg_shift) + value_shift``."""

    def __init__(self, op, arg_shift=0.0, value_shift=0.0):
        self.op = op
        self.dim = op.dim
        self.a = np.broadcast_to(np.asarray(arg_shift, dtype=float), (self.dim,)).copy()
        self.b = np.broadcast_to(np.asarray(value_shift, dtype=float), (self.dim,)).copy()
        self.maximal = op.maximal
        self.time_dependent = op.time_dependent

    def apply(self, v, t=None):
        return [s + self.b for s in self.op.apply(as_point(v, self.dim) - self.a, t)]

    def resolvent(self, tau, rhs, t=None):
        self._check_tau(tau)
        r = as_point(rhs, self.dim)
        return self.a + self.op.resolvent(tau, r - tau * self.b - self.a, t)

    def describe(self):
        return {"tag": "Shifted", "op": self.op.describe(), "arg_shift": self.a.tolist(), "value_shift": self.b.tolist()}


class Sum(MonotoneOp):
    """``alpha_1 + A`` with ``A`` linear; the resolvent is available when both are linear."""

    def __init__(self, op, linear):
        A = linear.linear_matrix()
        if A is None:
            raise ValueError("second summand must be linear")
        self.op = op
        self.lin = linear
        self.dim = op.dim
        self.maximal = op.maximal
        self.time_dependent = op.time_dependent

    def apply(self, v, t=None):
        v = as_point(v, self.dim)
        Av = self.lin.linear_matrix() @ v
        return [s + Av for s in self.op.apply(v, t)]

    def linear_matrix(self):
        A = self.op.linear_matrix()
        return None if A is None else A + self.lin.linear_matrix()

    def resolvent(self, tau, rhs, t=None):
        M = self.linear_matrix()
        if M is None:
            raise NotImplementedError("resolvent of a nonlinear sum")
        return np.linalg.solve(np.eye(self.dim) + tau * M, as_point(rhs, self.dim))

    def describe(self):
        return {"tag": "Sum", "op": self.op.describe(), "linear": self.lin.describe()}


class Modulation:
    """Positive scalar time profile ``c(t)``: piecewise constant or affine."""

    def __init__(self, kind, values, breaks=None):
        self.kind = kind
        self.values = [float(x) for x in values]
        self.breaks = [float(x) for x in (breaks or [])]
        if kind == "piecewise":
            if len(self.values) != len(self.breaks) + 1:
                raise ValueError("piecewise modulation needs len(values) = len(breaks) + 1")
            if min(self.values) <= 0:
                raise ValueError("modulation must be positive")
        elif kind == "affine":
            if len(self.values) != 2:
                raise ValueError("affine modulation needs (c0, slope)")
        else:
            raise ValueError(f"unknown modulation kind {kind!r}")

    def __call__(self, t):
        if self.kind == "piecewise":
            c = self.values[int(np.searchsorted(self.breaks, t, side="right"))]
        else:
            c = self.values[0] + self.values[1] * t
        if not c > 0:
            raise ValueError(f"modulation is not positive at t={t}")
        return c

    def describe(self):
        return {"kind": self.kind, "values": self.values, "breaks": self.breaks}


class TimeDependent(MonotoneOp):
    """``(v, t) -> c(t) * alpha(v)``."""

    time_dependent = True

    def __init__(self, op, modulation):
        self.op = op
        self.c = modulation
        self.dim = op.dim
        self.maximal = op.maximal

    def apply(self, v, t=None):
        self._check_time(t)
        c = self.c(t)
        return [c * s for s in self.op.apply(v)]

    def resolvent(self, tau, rhs, t=None):
        self._check_time(t)
        self._check_tau(tau)
        return self.op.resolvent(tau * self.c(t), rhs)

    def describe(self):
        return {"tag": "TimeDependent", "op": self.op.describe(), "modulation": self.c.describe()}


# ---------------------------------------------------------------------------
# Graph samples
# ---------------------------------------------------------------------------


@dataclass
class GraphSample:
    """Finite list of graph pairs, stored as two ``(m, d)`` arrays."""

    v: np.ndarray
    vstar: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.vstar = np.atleast_2d(np.asarray(self.vstar, dtype=float))
        if self.v.shape != self.vstar.shape:
            raise DimensionError("v and vstar must have the same shape")
        if len(self.v) == 0:
            raise ImproperFunctionError("graph sample is empty")

    @property
    def dim(self):
        return self.v.shape[1]

    def __len__(self):
        return len(self.v)

    def monotonicity_violation(self, chunk=2048):
        """Most negative ``<v1* - v2*, v1 - v2>`` relative to scale (>= 0 is monotone)."""
        worst = 0.0
        m = len(self.v)
        scale = 1.0 + np.abs(self.v).max() * np.abs(self.vstar).max()
        for i in range(0, m, chunk):
            dv = self.v[i : i + chunk, None, :] - self.v[None, :, :]
            ds = self.vstar[i : i + chunk, None, :] - self.vstar[None, :, :]
            worst = min(worst, float(np.einsum("ijk,ijk->ij", dv, ds).min()) / scale)
        return worst

    def is_monotone(self, tol=MONOTONE_TOL):
        return self.monotonicity_violation() >= -tol

    def to_csv_rows(self):
        d = self.dim
        header = [f"v{i + 1}" for i in range(d)] + [f"vstar{i + 1}" for i in range(d)]
        rows = [[repr(float(x)) for x in np.concatenate([a, b])] for a, b in zip(self.v, self.vstar)]
        return header, rows

    @classmethod
    def from_csv_rows(cls, header, rows):
        d = len(header) // 2
        data = np.array([[float(c) for c in r] for r in rows])
        return cls(data[:, :d], data[:, d:])


def _collect(op, points, t):
    vs, ss = [], []
    for v in points:
        for s in op.apply(v, t):
            vs.append(v)
            ss.append(s)
    if not vs:
        raise ImproperFunctionError("operator graph is empty on the sampled region")
    return GraphSample(np.array(vs), np.array(ss))


def lattice(box, density):
    """Nodes of a uniform lattice on ``box = (lo, hi)``."""
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if density < 2:
        raise ValueError("density must be >= 2")
    axes = [np.linspace(a, b, density) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)))


def graph_sample(op, box, density, t=None, check=True):
    """All graph pairs with ``v`` on the box lattice and every sampled selection."""
    sample = _collect(op, lattice(box, density), t)
    if check and not sample.is_monotone():
        raise NonConvexError(f"sampled graph of {op!r} is not monotone")
    return sample


def random_graph_sample(op, count, scale=1.0, seed=0, t=None):
    """Graph pairs at Gaussian random points (for high-dimensional operators)."""
    rng = np.random.default_rng(seed)
    return _collect(op, scale * rng.standard_normal((count, op.dim)), t)


def resolvent_residual(op, tau, rhs, x, t=None):
    """Distance from ``(rhs - x) / tau`` to the interval hull of ``apply(op, x)``."""
    target = (as_point(rhs, op.dim) - x) / tau
    sel = np.array(op.apply(x, t))
    if len(sel) == 0:
        return np.inf
    lo, hi = sel.min(axis=0), sel.max(axis=0)
    return float(np.linalg.norm(target - np.clip(target, lo, hi)))


def from_description(desc):
    """Operator from a ``{"tag": ..., params}`` mapping."""
    desc = dict(desc)
    tag = desc.pop("tag", None)
    if tag == "Identity":
        return Identity(int(desc.get("dim", 1)))
    if tag == "LinearSPD":
        return LinearSPD(np.asarray(desc["A"], dtype=float))
    if tag == "ScalarMultiple":
        return LinearSPD(float(desc["c"]) * np.eye(int(desc.get("dim", 1))))
    if tag == "Sign1D":
        return Sign1D()
    if tag == "OnlyAtZero":
        return OnlyAtZero(int(desc.get("dim", 1)))
    if tag == "Subdifferential":
        return Subdifferential(function_from_description(desc["phi"]))
    if tag == "PLaplacian1D":
        return PLaplacian1D(float(desc["p"]), int(desc["N"]), desc.get("h"))
    if tag == "Scaled":
        return Scaled(from_description(desc["op"]), float(desc["c"]))
    if tag == "Shifted":
        return Shifted(from_description(desc["op"]), desc.get("arg_shift", 0.0), desc.get("value_shift", 0.0))
    if tag == "TimeDependent":
        m = desc["modulation"]
        return TimeDependent(from_description(desc["op"]), Modulation(m["kind"], m["values"], m.get("breaks")))
    raise ValueError(f"unknown operator tag {tag!r}")


__all__ = [
    "Bounds",
    "GraphSample",
    "GraphSampled",
    "Identity",
    "LinearSPD",
    "Modulation",
    "MonotoneOp",
    "OnlyAtZero",
    "PLaplacian1D",
    "Scaled",
    "Shifted",
    "Sign1D",
    "Subdifferential",
    "Sum",
    "TimeDependent",
    "from_description",
    "graph_sample",
    "lattice",
    "random_graph_sample",
    "resolvent_residual",
]

