"""Representative functions on R^d x R^d and the Fitzpatrick calculus.

A representative ``g`` of a monotone operator ``alpha`` is convex, lsc, lies
above the duality pairing ``pi(v, v*) = <v, v*>`` and touches it exactly on
the graph of ``alpha``. ``transported_conjugate`` means ``g*`` composed with
the swap ``(v, v*) -> (v*, v)``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .convex import AbsPower, ExtConvexFn, HalfNormSq, as_batch, moreau_envelope
from .exceptions import DimensionError, ImproperFunctionError
from .operators import (
    GraphSample,
    Identity,
    LinearSPD,
    Scaled,
    Shifted,
    Sign1D,
    Subdifferential,
    TimeDependent,
    graph_sample,
    lattice,
)

INF = np.inf
EQUALITY_TOL = 1e-6
SPURIOUS_CELLS = 1.5


def pairing(V, VS):
    return np.einsum("ij,ij->i", V, VS)


def _time_array(t, m):
    if t is None:
        return None
    return np.broadcast_to(np.asarray(t, dtype=float), (m,))


class RepFn:
    """Bivariate convex function claimed to represent a monotone operator."""

    dim = 1
    smooth = True

    @property
    def differentiable(self):
        """Finite and differentiable everywhere (gradient possibly not Lipschitz)."""
        return self.smooth

    def evaluate(self, V, VS, t=None):
        raise NotImplementedError

    def __call__(self, v, vs, t=None):
        return float(self.evaluate(self._b(v), self._b(vs), t)[0])

    def _b(self, X):
        return as_batch(X, self.dim)

    def _pair(self, V, VS):
        V, VS = self._b(V), self._b(VS)
        if V.shape != VS.shape:
            raise DimensionError("v and v* batches differ in shape")
        return V, VS

    def grad(self, V, VS, t=None):
        """Subgradient selection ``(d/dv, d/dv*)`` at each row."""
        raise NotImplementedError(f"{type(self).__name__} has no gradient")

    def transported_conjugate(self):
        """Analytic ``g* o swap`` when known, else ``None``."""
        return None

    def project(self, V, VS):
        """Map rows onto the effective domain (identity for full-domain forms)."""
        return self._b(V), self._b(VS)

    def describe(self):
        raise NotImplementedError

    def __repr__(self):
        d = self.describe()
        params = ", ".join(f"{k}={v!r}" for k, v in d.items() if k != "tag")
        return f"{d['tag']}({params})"


class FitzpatrickOfGraph(RepFn):
    """``(v, v*) -> max_j <v*, v0_j> - <v0*_j, v0_j - v>`` over graph pairs."""

    smooth = False

    def __init__(self, sample):
        if len(sample) == 0:
            raise ImproperFunctionError("empty graph")
        self.sample = sample
        self.dim = sample.dim
        self._c = pairing(sample.v, sample.vstar)

    def _scores(self, V, VS):
        return VS @ self.sample.v.T + V @ self.sample.vstar.T - self._c

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        out = np.empty(len(V))
        for i in range(0, len(V), 4096):
            out[i : i + 4096] = self._scores(V[i : i + 4096], VS[i : i + 4096]).max(axis=1)
        return out

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        j = self._scores(V, VS).argmax(axis=1)
        return self.sample.vstar[j].copy(), self.sample.v[j].copy()

    def describe(self):
        return {"tag": "FitzpatrickOfGraph", "pairs": len(self.sample)}


class FenchelOfPotential(RepFn):
    """``(v, v*) -> phi(v) + phi*(v*)``, the self-dual representative of ``d phi``."""

    def __init__(self, phi):
        self.phi = phi
        self.conj = phi.conjugate()
        self.dim = phi.dim
        self.smooth = phi.smooth and self.conj.smooth

    @property
    def differentiable(self):
        return self.phi.differentiable and self.conj.differentiable

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        a = self.phi.values(V)
        b = self.conj.values(VS)
        return np.where(np.isinf(a) | np.isinf(b), INF, a + b)

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        return self.phi.gradient(V), self.conj.gradient(VS)

    def transported_conjugate(self):
        return self

    def project(self, V, VS):
        return self.phi.project_domain(self._b(V)), self.conj.project_domain(self._b(VS))

    def describe(self):
        return {"tag": "FenchelOfPotential", "phi": self.phi.describe()}


class Fb(RepFn):
    """``(v, v*) -> b (|v|^2 + |v*|^2)``; represents the identity at ``b = 1/2``."""

    def __init__(self, b, dim=1):
        if not b > 0:
            raise ValueError("Fb needs b > 0")
        self.b = float(b)
        self.dim = int(dim)

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        return self.b * (pairing(V, V) + pairing(VS, VS))

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        return 2 * self.b * V, 2 * self.b * VS

    def transported_conjugate(self):
        return Fb(1.0 / (4.0 * self.b), self.dim)

    def describe(self):
        return {"tag": "Fb", "b": self.b, "dim": self.dim}


class FitzpatrickLinear(RepFn):
    """Fitzpatrick function of a symmetric positive definite ``A``:
    ``(v, v*) -> <A^{-1}(v* + Av), v* + Av> / 4``."""

    def __init__(self, A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.A = A
        self.Ainv = np.linalg.inv(A)
        self.dim = A.shape[0]

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        S = VS + V @ self.A.T
        return 0.25 * pairing(S @ self.Ainv.T, S)

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        g = 0.5 * (VS + V @ self.A.T) @ self.Ainv.T
        return g @ self.A.T, g

    def transported_conjugate(self):
        return LinearOpRep(self.A)

    def describe(self):
        return {"tag": "FitzpatrickLinear", "A": self.A.tolist()}


class FitzIdentity(FitzpatrickLinear):
    """``(v, v*) -> |v + v*|^2 / 4``, the Fitzpatrick function of the identity."""

    def __init__(self, dim=1):
        super().__init__(np.eye(dim))

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        S = V + VS
        return 0.25 * pairing(S, S)

    def describe(self):
        return {"tag": "FitzIdentity", "dim": self.dim}


class LinearOpRep(RepFn):
    """``(v, v*) -> <Av, v>`` on the graph ``{v* = Av}``, ``+inf`` off it."""

    smooth = False

    def __init__(self, A):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.dim = self.A.shape[0]

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        AV = V @ self.A.T
        scale = 1.0 + np.abs(AV).max(axis=1) + np.abs(VS).max(axis=1)
        on = np.abs(VS - AV).max(axis=1) <= 1e-12 * scale
        return np.where(on, pairing(AV, V), INF)

    def transported_conjugate(self):
        return FitzpatrickLinear(self.A)

    def project(self, V, VS):
        V = self._b(V)
        return V, V @ self.A.T

    def describe(self):
        return {"tag": "LinearOpRep", "A": self.A.tolist()}


class InfConvolution(RepFn):
    """``g1 (+) alpha2`` for linear ``alpha2 = A``: ``g1(v, v* - Av) + <Av, v>``."""

    def __init__(self, g1, op):
        A = op.linear_matrix() if hasattr(op, "linear_matrix") else None
        if A is None:
            raise ValueError("closed-form inf-convolution needs a linear second operator")
        if g1.dim != A.shape[0]:
            raise DimensionError("dimension mismatch in inf-convolution")
        self.g1 = g1
        self.A = A
        self.dim = g1.dim
        self.smooth = g1.smooth

    @property
    def differentiable(self):
        return self.g1.differentiable

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        AV = V @ self.A.T
        return self.g1.evaluate(V, VS - AV, t) + pairing(AV, V)

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        gv, gs = self.g1.grad(V, VS - V @ self.A.T, t)
        return gv - gs @ self.A + V @ (self.A + self.A.T).T, gs

    def project(self, V, VS):
        V, VS = self._pair(V, VS)
        AV = V @ self.A.T
        W, WS = self.g1.project(V, VS - AV)
        return W, WS + W @ self.A.T

    def describe(self):
        return {"tag": "InfConvolution", "g1": self.g1.describe(), "A": self.A.tolist()}


def inf_convolution(g1, op):
    """Representative of ``alpha1 + alpha2`` from ``g1`` (for ``alpha1``) and linear ``alpha2``."""
    return InfConvolution(g1, op)


def inf_convolution_lattice(g1, g2, zbox, density):
    """Experimental brute-force partial inf-convolution for ``d = 1``:
    ``(v, v*) -> min_z g1(v, v* - z) + g2(v, z)`` over a lattice of ``z``."""
    if g1.dim != 1 or g2.dim != 1:
        raise DimensionError("lattice inf-convolution is implemented for d = 1 only")
    Z = np.linspace(zbox[0], zbox[1], density)

    class _Lattice(RepFn):
        dim = 1
        smooth = False

        def evaluate(self, V, VS, t=None):
            V, VS = self._pair(V, VS)
            m = len(V)
            Vr = np.repeat(V, density, axis=0)
            Zr = np.tile(Z, m)[:, None]
            vals = g1.evaluate(Vr, np.repeat(VS, density, axis=0) - Zr) + g2.evaluate(Vr, Zr)
            return vals.reshape(m, density).min(axis=1)

        def describe(self):
            return {"tag": "InfConvolutionLattice", "density": density}

    return _Lattice()


class ScaledRep(RepFn):
    """``(v, v*, t) -> c(t) g(v, v* / c(t))``; represents ``c(t) alpha`` when ``g`` represents ``alpha``."""

    def __init__(self, g, c):
        self.g = g
        self.c = c
        self.dim = g.dim
        self.smooth = g.smooth

    @property
    def differentiable(self):
        return self.g.differentiable

    def _coef(self, t, m):
        if callable(self.c):
            if t is None:
                raise ValueError("time-modulated representative needs t")
            return np.array([self.c(float(s)) for s in _time_array(t, m)])
        return np.full(m, float(self.c))

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        c = self._coef(t, len(V))
        return c * self.g.evaluate(V, VS / c[:, None], t)

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        c = self._coef(t, len(V))
        gv, gs = self.g.grad(V, VS / c[:, None], t)
        return c[:, None] * gv, gs

    def transported_conjugate(self):
        if callable(self.c):
            return None
        h = self.g.transported_conjugate()
        return None if h is None else ScaledRep(h, self.c)

    def project(self, V, VS):
        V, VS = self._pair(V, VS)
        c = float(self.c) if not callable(self.c) else 1.0
        W, WS = self.g.project(V, VS / c)
        return W, c * WS

    def describe(self):
        c = self.c.describe() if hasattr(self.c, "describe") else self.c
        return {"tag": "ScaledRep", "g": self.g.describe(), "c": c}


class ShiftedRep(RepFn):
    """Represents ``v -> alpha(v - a) + b`` from a representative of ``alpha``."""

    def __init__(self, g, a, b):
        self.g = g
        self.dim = g.dim
        self.a = np.broadcast_to(np.asarray(a, dtype=float), (self.dim,))
        self.b = np.broadcast_to(np.asarray(b, dtype=float), (self.dim,))
        self.smooth = g.smooth

    @property
    def differentiable(self):
        return self.g.differentiable

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        return self.g.evaluate(V - self.a, VS - self.b, t) + VS @ self.a + V @ self.b - self.a @ self.b

    def grad(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        gv, gs = self.g.grad(V - self.a, VS - self.b, t)
        return gv + self.b, gs + self.a

    def project(self, V, VS):
        V, VS = self._pair(V, VS)
        W, WS = self.g.project(V - self.a, VS - self.b)
        return W + self.a, WS + self.b

    def describe(self):
        return {"tag": "ShiftedRep", "g": self.g.describe(), "a": self.a.tolist(), "b": self.b.tolist()}


class LatticeConjugate(RepFn):
    """Bivariate conjugate by direct sup over a lattice of ``(a, a*)`` points.

    ``transported=True`` gives ``(v, v*) -> max <v*, a> + <v, a*> - g(a, a*)``;
    otherwise ``(w*, w) -> max <w*, a> + <w, a*> - g(a, a*)`` in the
    conjugate's own argument order. Ties go to the lowest lattice index.
    """

    smooth = False

    def __init__(self, g, box, density, dual_box=None, transported=True):
        self.g = g
        self.dim = g.dim
        self.transported = transported
        lo, hi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in box)
        dlo, dhi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (dual_box or box))
        full = lattice((np.concatenate([lo, dlo]), np.concatenate([hi, dhi])), density)
        d = self.dim
        A, AS = full[:, :d], full[:, d:]
        vals = g.evaluate(A, AS)
        keep = np.isfinite(vals)
        if not keep.any():
            raise ImproperFunctionError("representative is +inf on the whole lattice")
        self.nodes_v, self.nodes_s, self.vals = A[keep], AS[keep], vals[keep]

    def argmax(self, X, Y):
        """Lattice index attaining ``max <X, a> + <Y, a*> - g``."""
        scores = X @ self.nodes_v.T + Y @ self.nodes_s.T - self.vals
        return scores.argmax(axis=1), scores

    def evaluate(self, V, VS, t=None):
        V, VS = self._pair(V, VS)
        X, Y = (VS, V) if self.transported else (V, VS)
        out = np.empty(len(V))
        for i in range(0, len(V), 2048):
            j, scores = self.argmax(X[i : i + 2048], Y[i : i + 2048])
            out[i : i + 2048] = scores[np.arange(len(j)), j]
        return out

    def describe(self):
        return {"tag": "LatticeConjugate", "nodes": len(self.vals), "transported": self.transported}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


class MoreauSmoothed(RepFn):
    """Fenchel-type representative with its nonsmooth parts replaced by Moreau
    envelopes of width ``eps``; a smooth under-approximation used for
    continuation in the null-minimization solver."""

    smooth = True

    def __init__(self, phi, conj, eps, c=None, shift=None):
        self.phi, self.conj, self.eps = phi, conj, float(eps)
        self.dim = phi.dim
        self.c = c
        self.a, self.b = shift if shift is not None else (np.zeros(self.dim), np.zeros(self.dim))

    def _part(self, f, X):
        if f.smooth:
            return f.values(X), f.gradient(X)
        return moreau_envelope(f, self.eps, X)

    def _coef(self, t, m):
        return ScaledRep._coef(self, t, m) if self.c is not None else np.ones(m)

    def _eval_grad(self, V, VS, t):
        V, VS = self._pair(V, VS)
        c = self._coef(t, len(V))
        Vs, Ss = V - self.a, (VS - self.b) / c[:, None]
        fa, ga = self._part(self.phi, Vs)
        fb, gb = self._part(self.conj, Ss)
        val = c * (fa + fb) + VS @ self.a + V @ self.b - self.a @ self.b
        return val, c[:, None] * ga + self.b, gb + self.a

    def evaluate(self, V, VS, t=None):
        return self._eval_grad(V, VS, t)[0]

    def grad(self, V, VS, t=None):
        return self._eval_grad(V, VS, t)[1:]

    def describe(self):
        return {"tag": "MoreauSmoothed", "phi": self.phi.describe(), "eps": self.eps}


def smoothed(rep, eps):
    """Moreau-smoothed version of a (scaled or shifted) Fenchel representative, else ``None``."""
    c, shift, base = None, None, rep
    if isinstance(base, ShiftedRep):
        shift = (base.a, base.b)
        base = base.g
    if isinstance(base, ScaledRep):
        c = base.c
        base = base.g
    if isinstance(base, FenchelOfPotential):
        return MoreauSmoothed(base.phi, base.conj, eps, c=c, shift=shift)
    return None


def fitzpatrick_of(sample):
    """Fitzpatrick function of a sampled graph."""
    if not isinstance(sample, GraphSample):
        sample = GraphSample(*sample)
    return FitzpatrickOfGraph(sample)


def default_rep(op):
    """A closed-form representative for a catalog operator."""
    if isinstance(op, Identity):
        return FitzIdentity(op.dim)
    if isinstance(op, LinearSPD):
        if np.linalg.eigvalsh(op.A)[0] > 0:
            return FitzpatrickLinear(op.A)
        return FenchelOfPotential(_QuadraticForm(op.A))
    if isinstance(op, Subdifferential):
        return FenchelOfPotential(op.phi)
    if isinstance(op, Sign1D):
        return FenchelOfPotential(AbsPower(1.0))
    if isinstance(op, Scaled):
        return ScaledRep(default_rep(op.op), op.c)
    if isinstance(op, Shifted):
        return ShiftedRep(default_rep(op.op), op.a, op.b)
    if isinstance(op, TimeDependent):
        return ScaledRep(default_rep(op.op), op.c)
    raise ValueError(f"no closed-form representative for {op!r}")


class _QuadraticForm(ExtConvexFn):
    """``x -> <Ax, x>/2`` for positive semidefinite ``A`` (conjugate only when definite)."""

    def __init__(self, A):
        self.A = A
        self.dim = A.shape[0]

    def values(self, X):
        X = as_batch(X, self.dim)
        return 0.5 * pairing(X @ self.A.T, X)

    def gradient(self, X):
        return as_batch(X, self.dim) @ self.A.T

    def _conjugate(self):
        return _QuadraticForm(np.linalg.inv(self.A))

    def describe(self):
        return {"tag": "QuadraticForm", "A": self.A.tolist()}


def null_gap(g, v, vs, t=None):
    """``g(v, v*) - <v, v*>``; zero exactly on the represented graph."""
    V, VS = g._pair(v, vs)
    val = g.evaluate(V, VS, t)
    out = np.where(np.isinf(val), INF, val - pairing(V, VS))
    return float(out[0]) if out.shape == (1,) else out


def conjugate_rep(g, box=None, density=None, transported=True, dual_box=None):
    """``g* o swap`` (or plain ``g*``): analytic when known, else a lattice sup."""
    if transported:
        h = g.transported_conjugate()
        if h is not None:
            return h
    if box is None or density is None:
        raise ValueError("lattice conjugate needs a box and a density")
    return LatticeConjugate(g, box, density, dual_box=dual_box, transported=transported)


def self_dual_check(g, probes_v, probes_vs, box=None, density=None):
    """``max |g*(swap .) - g|`` over probes (``inf`` if exactly one side is infinite)."""
    h = conjugate_rep(g, box, density)
    a = h.evaluate(probes_v, probes_vs)
    b = g.evaluate(probes_v, probes_vs)
    both_inf = np.isinf(a) & np.isinf(b)
    diff = np.where(both_inf, 0.0, np.abs(np.where(np.isinf(a) | np.isinf(b), INF, a - b)))
    return float(diff.max())


@dataclass
class MembershipReport:
    convexity_violation: float
    domination_margin: float
    scale: float

    @property
    def ok(self):
        return self.convexity_violation <= 1e-9 * self.scale and self.domination_margin >= -1e-9 * self.scale


def membership_check(g, box, n_pairs=1000, n_probes=10000, seed=0, t=None):
    """Midpoint convexity on random segments and ``g >= pi`` on random probes."""
    rng = np.random.default_rng(seed)
    lo, hi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in box)
    d = g.dim

    def draw(m):
        P = rng.uniform(np.concatenate([lo, lo]), np.concatenate([hi, hi]), size=(m, 2 * d))
        return P[:, :d], P[:, d:]

    V1, S1 = draw(n_pairs)
    V2, S2 = draw(n_pairs)
    g1, g2 = g.evaluate(V1, S1, t), g.evaluate(V2, S2, t)
    gm = g.evaluate(0.5 * (V1 + V2), 0.5 * (S1 + S2), t)
    fin = np.isfinite(g1) & np.isfinite(g2)
    conv = float(np.max(gm[fin] - 0.5 * (g1[fin] + g2[fin]), initial=0.0))
    V, S = draw(n_probes)
    gv = g.evaluate(V, S, t)
    margin = float(np.min(gv - pairing(V, S)))
    finite = np.concatenate([g1[fin], g2[fin], gv[np.isfinite(gv)]])
    scale = 1.0 + (np.abs(finite).max() if finite.size else 0.0)
    return MembershipReport(conv, margin, scale)


@dataclass
class RepresentationReport:
    """Outcome of testing whether ``g`` represents ``op`` on a probe lattice."""

    max_violation_of_domination: float
    equality_set_match: float
    spurious_equality_points: np.ndarray
    domination_scale: float = 1.0
    n_graph: int = 0
    n_probes: int = 0
    graph_gaps: np.ndarray = field(default=None, repr=False)

    @property
    def domination_ok(self):
        return self.max_violation_of_domination >= -1e-9 * self.domination_scale

    @property
    def represents(self):
        return self.domination_ok and self.equality_set_match >= 0.99 and len(self.spurious_equality_points) == 0


def _graph_hull(op, vnodes, t=None):
    """Per lattice ``v``: componentwise hull ``[lo, hi]`` of the sampled selections (NaN if empty)."""
    d = vnodes.shape[1]
    lo = np.full((len(vnodes), d), np.nan)
    hi = np.full((len(vnodes), d), np.nan)
    for i, v in enumerate(vnodes):
        sel = op.apply(v, t)
        if sel:
            S = np.array(sel)
            lo[i], hi[i] = S.min(axis=0), S.max(axis=0)
    return lo, hi


def represents_check(g, op, box, density, dual_box=None, tol=EQUALITY_TOL, t=None):
    """Check ``g >= pi`` on the probe lattice, ``g = pi`` on sampled graph pairs,
    and flag lattice probes with ``g = pi`` lying farther than 1.5 cells from
    the graph."""
    lo, hi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in box)
    dlo, dhi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (dual_box or box))
    d = g.dim
    P = lattice((np.concatenate([lo, dlo]), np.concatenate([hi, dhi])), density)
    V, S = P[:, :d], P[:, d:]
    gv = g.evaluate(V, S, t)
    gap = gv - pairing(V, S)
    fin = gap[np.isfinite(gap)]
    scale = 1.0 + (np.abs(gv[np.isfinite(gv)]).max() if fin.size else 0.0)
    margin = float(fin.min()) if fin.size else INF

    graph = graph_sample(op, box, density, t=t, check=False)
    ggap = g.evaluate(graph.v, graph.vstar, t) - pairing(graph.v, graph.vstar)
    match = float(np.mean(np.abs(ggap) <= tol))

    # distance from equality probes to the sampled graph, in lattice cells
    hv = (hi - lo) / (density - 1)
    hs = (dhi - dlo) / (density - 1)
    vnodes = lattice(box, density)
    glo, ghi = _graph_hull(op, vnodes, t)
    has = ~np.isnan(glo[:, 0])
    eq = np.flatnonzero(np.abs(gap) <= tol)
    spurious = []
    for i in eq:
        if not has.any():
            spurious.append(P[i])
            continue
        dv = np.abs(vnodes[has] - V[i]) / np.where(hv > 0, hv, 1.0)
        ds = np.abs(S[i] - np.clip(S[i], glo[has], ghi[has])) / np.where(hs > 0, hs, 1.0)
        cells = np.maximum(dv.max(axis=1), ds.max(axis=1)).min()
        if cells > SPURIOUS_CELLS:
            spurious.append(P[i])
    return RepresentationReport(
        max_violation_of_domination=margin,
        equality_set_match=match,
        spurious_equality_points=np.array(spurious).reshape(-1, 2 * d),
        domination_scale=scale,
        n_graph=len(graph),
        n_probes=len(P),
        graph_gaps=ggap,
    )


def sampled_upper_envelope(sample, V, VS):
    """Exact ``f* o swap`` of the Fitzpatrick function of a finite graph sample.

    ``f*(v*, v)`` is the smallest ``sum_j l_j <v_j, v*_j>`` over convex weights
    ``l`` with ``sum l_j v_j = v`` and ``sum l_j v*_j = v*``; ``+inf`` outside
    the convex hull of the sample. One small LP per probe.
    """
    G = np.hstack([sample.v, sample.vstar]).T
    Aeq = np.vstack([G, np.ones(len(sample))])
    c = pairing(sample.v, sample.vstar)
    out = np.empty(len(V))
    for i, (v, vs) in enumerate(zip(V, VS)):
        beq = np.concatenate([v, vs, [1.0]])
        res = linprog(c, A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs")
        out[i] = res.fun if res.status == 0 else INF
    return out


@dataclass
class BandReport:
    """Two-sided band test ``f_alpha <= g <= f_alpha* o swap``."""

    ok: bool
    rejected: bool
    lower_margin: float
    upper_margin: float
    lower_slack: float
    upper_slack: float
    n_probes: int
    message: str = ""


def band_check(op, g, box, density, dual_box=None, probe_density=None, tol=EQUALITY_TOL, t=None):
    """Verify ``f_alpha <= g <= f_alpha* o swap`` on a probe lattice.

    ``f_alpha`` comes from the sampled graph, so it under-estimates the true
    Fitzpatrick function and its conjugate over-estimates the true upper end:
    both tests are sound one-sided certificates. The sampling slack is
    estimated by comparing with a graph sampled at twice the density.
    """
    if not op.maximal:
        raise ValueError("band test needs a maximal monotone operator")
    lo, hi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in box)
    dlo, dhi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (dual_box or box))
    d = g.dim
    P = lattice((np.concatenate([lo, dlo]), np.concatenate([hi, dhi])), probe_density or density)
    V, S = P[:, :d], P[:, d:]
    gv = g.evaluate(V, S, t)
    dom = gv - pairing(V, S)
    scale = 1.0 + np.abs(gv[np.isfinite(gv)]).max()
    if np.nanmin(dom) < -1e-9 * scale:
        return BandReport(False, True, float(np.nanmin(dom)), np.nan, np.nan, np.nan, len(P), "g fails pi-domination")

    coarse = graph_sample(op, box, density, t=t)
    fine = graph_sample(op, box, 2 * density - 1, t=t)
    f_lo = FitzpatrickOfGraph(coarse).evaluate(V, S)
    lower = float(np.min(np.where(np.isinf(gv), INF, gv - f_lo)))
    lower_slack = float(np.max(FitzpatrickOfGraph(fine).evaluate(V, S) - f_lo))

    # the upper envelope is finite only on the hull of the graph, so test there
    probes_v = np.vstack([coarse.v, V])
    probes_s = np.vstack([coarse.vstar, S])
    up = sampled_upper_envelope(coarse, probes_v, probes_s)
    gp = g.evaluate(probes_v, probes_s, t)
    finite = np.isfinite(up)
    upper = float(np.min(up[finite] - gp[finite])) if finite.any() else INF
    up_fine = sampled_upper_envelope(fine, coarse.v, coarse.vstar)
    upper_slack = float(np.max(up[: len(coarse)] - up_fine))
    ok = lower >= -tol * scale and upper >= -tol * scale
    return BandReport(ok, False, lower, upper, lower_slack, upper_slack, len(P))


def represented_graph(g, vs_bounds, v_values, t=None):
    """Minimize ``J(v, .) = g(v, .) - <v, .>`` over ``v*`` for each 1D ``v``.

    Returns ``(v*, J_min)`` arrays; the represented graph contains ``(v, v*)``
    exactly when ``J_min`` vanishes.
    """
    if g.dim != 1:
        raise DimensionError("represented_graph is implemented for d = 1")
    best_s, best_j = [], []
    for v in np.asarray(v_values, dtype=float):
        fun = lambda s: null_gap(g, [v], [s], t)  # noqa: E731
        res = minimize_scalar(fun, bounds=vs_bounds, method="bounded", options={"xatol": 1e-10})
        best_s.append(res.x)
        best_j.append(res.fun)
    return np.array(best_s), np.array(best_j)


def half_norm_rep(dim=1):
    """Fenchel representative of the identity, ``(|v|^2 + |v*|^2)/2``."""
    return FenchelOfPotential(HalfNormSq(dim))


def from_description(desc):
    from .convex import from_description as fn_desc
    from .operators import from_description as op_desc

    desc = dict(desc)
    tag = desc.pop("tag", None)
    dim = int(desc.get("dim", 1))
    if tag == "Fb":
        return Fb(float(desc["b"]), dim)
    if tag == "FitzIdentity":
        return FitzIdentity(dim)
    if tag == "FenchelOfPotential":
        return FenchelOfPotential(fn_desc(desc["phi"]))
    if tag == "LinearOpRep":
        return LinearOpRep(desc["A"])
    if tag == "FitzpatrickLinear":
        return FitzpatrickLinear(desc["A"])
    if tag == "InfConvolution":
        return InfConvolution(from_description(desc["g1"]), op_desc(desc["op"]))
    if tag == "FitzpatrickOfGraph":
        op = op_desc(desc["op"])
        return FitzpatrickOfGraph(graph_sample(op, (desc["lo"], desc["hi"]), int(desc["density"])))
    if tag == "Default":
        return default_rep(op_desc(desc["op"]))
    raise ValueError(f"unknown representative tag {tag!r}")
