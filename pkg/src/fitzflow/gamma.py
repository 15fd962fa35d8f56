"""Finite-probe Gamma-convergence tests and structural stability experiments.

All verdicts are certificates over fixed probe sets: a liminf failure is a
genuine counterexample, while a recovery failure only means that the search
budget found no recovery sequence.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .convex import ExtConvexFn
from .exceptions import FitzflowError
from .flows import (
    FlowSolution,
    Trajectory,
    evaluate_functional,
    relative_l2,
    solve_null_min,
    solve_reference,
)
from .operators import lattice
from .representatives import RepFn, represented_graph

__all__ = [
    "CoercivityError",
    "FnSequence",
    "GammaVerdict",
    "KuratowskiReport",
    "StabilityReport",
    "coercivity_witness",
    "dyadic_weights",
    "dne_stability_experiment",
    "evolutionary_gamma_check",
    "fit_rate",
    "gamma_check_static",
    "kuratowski_diagnostic",
    "stability_experiment",
    "tail_limit",
]


class CoercivityError(FitzflowError):
    """The equi-coercivity / equi-boundedness witness failed on the probes."""


# ---------------------------------------------------------------------------
# Sequences and point evaluation
# ---------------------------------------------------------------------------


def _evaluator(f):
    """Callable ``X -> values`` on stacked points; RepFn points are ``(v, v*)``."""
    if isinstance(f, RepFn):
        d = f.dim
        return lambda X: f.evaluate(X[:, :d], X[:, d:])
    if isinstance(f, ExtConvexFn):
        return f.values
    if callable(f):
        return f
    raise TypeError(f"cannot evaluate {f!r}")


def _point_dim(f):
    return 2 * f.dim if isinstance(f, RepFn) else f.dim


class FnSequence:
    """Indexed family ``n -> f_n`` with a claimed limit.

    Parameters
    ----------
    generator : callable
        ``n -> RepFn`` or ``n -> ExtConvexFn``.
    limit : RepFn or ExtConvexFn
        The claimed Gamma-limit.
    n_max : int
        Largest admissible index.
    label : str
        Free-form name used in reports.
    """

    def __init__(self, generator, limit, n_max=64, label="sequence"):
        self.generator = generator
        self.limit = limit
        self.n_max = int(n_max)
        self.label = label
        self._cache = {}

    def __call__(self, n):
        if not 1 <= n <= self.n_max:
            raise IndexError(f"index {n} outside 1..{self.n_max}")
        if n not in self._cache:
            try:
                self._cache[n] = self.generator(n)
            except Exception as exc:  # surface as a library error
                raise FitzflowError(f"generator failed at n={n}: {exc}") from exc
        return self._cache[n]

    @property
    def dim(self):
        return _point_dim(self.limit)

    def values(self, n, X):
        return _evaluator(self(n))(np.atleast_2d(X))

    def limit_values(self, X):
        return _evaluator(self.limit)(np.atleast_2d(X))


def coercivity_witness(seq, probes, n_list):
    """Constants ``(C1, C2, C3)`` with ``C1|w|^2 <= f_n(w) <= C2|w|^2 + C3``.

    ``C1`` is the smallest ratio ``f_n(w)/|w|^2`` over probes with ``|w| >= 1``,
    ``C2`` the largest such ratio, ``C3`` the largest value on ``|w| < 1``.
    Raises :class:`CoercivityError` if no positive ``C1`` or finite ``C2``
    exists on the probes.
    """
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    r2 = np.sum(P * P, axis=1)
    far = r2 >= 1.0
    c1, c2, c3 = math.inf, 0.0, 0.0
    for n in n_list:
        vals = seq.values(n, P)
        if np.any(far):
            ratio = vals[far] / r2[far]
            c1 = min(c1, float(ratio.min()))
            c2 = max(c2, float(ratio.max()))
        if np.any(~far):
            c3 = max(c3, float(vals[~far].max()))
    if not (c1 > 0 and math.isfinite(c2) and math.isfinite(c3)):
        raise CoercivityError(f"coercivity witness failed: C1={c1}, C2={c2}, C3={c3}")
    return c1, c2, max(c3, 0.0)


def _loo_error(x, y, deg):
    """Leave-one-out RMS prediction error of a degree-``deg`` polynomial fit."""
    P = np.polynomial.polynomial
    err = []
    for i in range(len(x)):
        keep = np.arange(len(x)) != i
        coef = P.polyfit(x[keep], y[keep], deg)
        err.append(P.polyval(x[i], coef) - y[i])
    return float(np.sqrt(np.mean(np.square(err))))


def tail_limit(ns, values, degree=2):
    """Extrapolated limit of ``values[n]`` from the last half of ``ns``.

    Fits polynomials in ``1/n`` of degree ``0..degree`` by least squares and
    keeps the one with the smallest leave-one-out prediction error, so smooth
    tails are extrapolated while oscillating tails are averaged. Any infinite
    tail value makes the limit ``+inf``.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    half = len(ns) // 2
    x, y = 1.0 / ns[half:], values[half:]
    if np.any(~np.isfinite(y)):
        return math.inf
    if len(x) < 3:
        return float(y[-1])
    degs = range(0, min(degree, len(x) - 2) + 1)
    best = min(degs, key=lambda d: _loo_error(x, y, d))
    return float(np.polynomial.polynomial.polyfit(x, y, best)[0])


# ---------------------------------------------------------------------------
# Static verdicts
# ---------------------------------------------------------------------------


@dataclass
class KuratowskiReport:
    """Graph convergence of the represented operators (d = 1).

    ``lower_distance[i]``: largest distance from a limit-graph point to the
    graph represented by ``f_{n_i}``; ``upper_distance[i]``: largest distance
    from a point of that graph to the limit graph.
    """

    n_list: list
    lower_distance: np.ndarray
    upper_distance: np.ndarray
    tol: float

    @property
    def converges(self):
        # both Kuratowski limits must equal the limit graph
        return bool(self.lower_distance[-1] <= self.tol and self.upper_distance[-1] <= self.tol)

    @property
    def upper_inclusion(self):
        return bool(self.upper_distance[-1] <= self.tol)


@dataclass
class GammaVerdict:
    liminf_ok: bool
    recovery_ok: bool
    liminf_deficit: float
    liminf_witness: dict
    recovery_deficit: float
    recovery_witness: dict
    weights_tested: list
    tol: float
    seed: int
    n_list: list
    diagnostics: dict = field(default_factory=dict)
    per_weight: list = field(default_factory=list)

    @property
    def ok(self):
        return self.liminf_ok and self.recovery_ok

    def rows(self):
        """Flat rows for CSV export."""
        out = [
            ("liminf_ok", int(self.liminf_ok)),
            ("liminf_deficit", self.liminf_deficit),
            ("recovery_ok", int(self.recovery_ok)),
            ("recovery_deficit", self.recovery_deficit),
            ("tol", self.tol),
            ("seed", self.seed),
        ]
        for k, v in self.diagnostics.items():
            if isinstance(v, (bool, int, float, np.floating)):
                out.append((k, float(v)))
        return out


def _directions(rng, dim, count):
    D = rng.standard_normal((count, dim))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def _recovery_search(seq, n, w, target, lam=1.0, budget=400):
    """``argmin f_n(x) + (n lam / 2)|x - w|^2`` by Nelder-Mead started at ``w``."""
    fn = _evaluator(seq(n))

    def obj(x):
        v = float(fn(x[None])[0])
        return v + 0.5 * n * lam * float(np.sum((x - w) ** 2)) if math.isfinite(v) else 1e300

    res = minimize(obj, w, method="Nelder-Mead", options={"maxiter": budget, "xatol": 1e-10, "fatol": 1e-12})
    x = res.x
    return x, float(fn(x[None])[0])


def gamma_check_static(seq, box, n_list, density=9, n_dirs=4, seed=0, tol=1e-6, kuratowski=None):
    """Liminf and recovery tests of ``f_n -> seq.limit`` on a probe lattice.

    Approaching sequences are ``w + e/n`` for ``n_dirs`` random unit ``e``,
    for ``e = -w/|w|`` and for ``e = 0``. The liminf of each is estimated by
    :func:`tail_limit` and compared with ``f(w)``. Recovery first tries the
    constant sequence, then a proximal search with weight ``n``.

    ``kuratowski`` (optional) is ``(v_values, vs_bounds)``; it adds a graph
    convergence diagnostic for one-dimensional representatives.
    """
    n_list = sorted(int(n) for n in n_list)
    rng = np.random.default_rng(seed)
    P = lattice(box, density)
    dim = P.shape[1]
    if dim != seq.dim:
        raise ValueError(f"probe box has dimension {dim}, sequence points have {seq.dim}")
    lim = seq.limit_values(P)
    scale = 1.0 + float(np.max(np.abs(lim[np.isfinite(lim)]), initial=0.0))
    thr = tol * scale
    ns = np.array(n_list, dtype=float)

    dirs = list(_directions(rng, dim, n_dirs))
    worst_li, wit_li = 0.0, {}
    worst_re, wit_re = 0.0, {}
    skipped = 0
    for i, w in enumerate(P):
        fw = lim[i]
        norm = float(np.linalg.norm(w))
        fam = [("constant", np.zeros(dim))] + [(f"random{j}", e) for j, e in enumerate(dirs)]
        if norm > 0:
            fam.append(("inward", -w / norm))
        if not math.isfinite(fw):
            skipped += 1
            continue
        for name, e in fam:
            vals = [float(seq.values(n, w + e / n)[0]) for n in n_list]
            deficit = fw - tail_limit(ns, vals)
            if deficit > worst_li:
                worst_li, wit_li = deficit, {"point": w.tolist(), "sequence": name, "deficit": deficit}
        # recovery
        vals = [float(seq.values(n, w)[0]) for n in n_list]
        excess = tail_limit(ns, vals) - fw
        kind = "constant"
        if excess > thr:
            vals = [_recovery_search(seq, n, w, fw)[1] for n in n_list]
            excess = min(excess, tail_limit(ns, vals) - fw)
            kind = "proximal"
        if excess > worst_re:
            worst_re, wit_re = excess, {"point": w.tolist(), "sequence": kind, "deficit": excess}

    diagnostics = {
        "pairing_continuity": True,
        "pairing_continuity_tautological": True,
        "probes": len(P),
        "probes_at_infinity": skipped,
    }
    try:
        diagnostics["coercivity"] = coercivity_witness(seq, P, n_list)
    except CoercivityError as exc:
        diagnostics["coercivity"] = str(exc)
    if kuratowski is not None:
        v_values, vs_bounds = kuratowski
        diagnostics["kuratowski"] = kuratowski_diagnostic(seq, v_values, vs_bounds, n_list)
    return GammaVerdict(
        liminf_ok=bool(worst_li <= thr),
        recovery_ok=bool(worst_re <= thr),
        liminf_deficit=worst_li,
        liminf_witness=wit_li,
        recovery_deficit=worst_re,
        recovery_witness=wit_re,
        weights_tested=["none"],
        tol=thr,
        seed=seed,
        n_list=n_list,
        diagnostics=diagnostics,
    )


def _graph_points(g, v_values, vs_bounds, tol):
    vs, jmin = represented_graph(g, vs_bounds, v_values)
    keep = jmin <= tol
    return np.column_stack([np.asarray(v_values, dtype=float)[keep], vs[keep]])


def _set_distance(A, B):
    """``max_{a in A} min_{b in B} |a - b|`` (``inf`` if B is empty)."""
    if len(A) == 0:
        return 0.0
    if len(B) == 0:
        return math.inf
    D = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    return float(D.min(axis=1).max())


def kuratowski_diagnostic(seq, v_values, vs_bounds, n_list, tol=1e-8):
    """Compare represented graphs of ``f_n`` with that of the limit.

    The graphs are sampled at ``v_values`` by minimizing the null gap in
    ``v*`` over ``vs_bounds``; a point belongs to a graph when its gap is at
    most ``tol``.
    """
    limit_graph = _graph_points(seq.limit, v_values, vs_bounds, tol)
    lower, upper = [], []
    for n in n_list:
        G = _graph_points(seq(n), v_values, vs_bounds, tol)
        lower.append(_set_distance(limit_graph, G))
        upper.append(_set_distance(G, limit_graph))
    step = float(np.min(np.diff(np.unique(v_values)))) if len(v_values) > 1 else 1.0
    return KuratowskiReport(list(n_list), np.array(lower), np.array(upper), tol=step)


# ---------------------------------------------------------------------------
# Evolutionary verdicts
# ---------------------------------------------------------------------------


def dyadic_weights(T=1.0, level=4, constants=(1.0, 0.5)):
    """Indicators of the ``2**level`` dyadic subintervals of ``[0, T]`` plus constants.

    Returns a list of ``(label, callable)``; half-open intervals, the last
    one closed.
    """
    out = []
    m = 2**level
    for j in range(m):
        a, b = j * T / m, (j + 1) * T / m
        last = j == m - 1
        out.append((f"1[{a:g},{b:g}{']' if last else ')'}", lambda t, a=a, b=b, last=last: ((t >= a) & ((t <= b) if last else (t < b))).astype(float)))
    for c in constants:
        out.append((f"const {c:g}", lambda t, c=c: np.full(np.shape(t), c)))
    return out


def _trajectory_probes(grid, dim, count, rng):
    """Interval values of smooth random trajectories plus the zero and unit constants."""
    t = grid.mids
    probes = [np.zeros((grid.N, dim)), np.ones((grid.N, dim))]
    for _ in range(count):
        a, b, c = rng.standard_normal((3, dim))
        probes.append(a + b * t[:, None] + c * np.sin(2 * np.pi * t)[:, None])
    return probes


def evolutionary_gamma_check(
    integrand, limit, n_list, grid, dim=1, weights=None, n_probes=6, seed=0, tol=1e-6, time_independent=False
):
    """Gamma-tests of the time-weighted functionals ``[psi_n, xi]``.

    Parameters
    ----------
    integrand : callable
        ``(n, t, W) -> values`` for times ``t`` of shape ``(m,)`` and points
        ``W`` of shape ``(m, dim)``.
    limit : callable
        ``(t, W) -> values`` of the claimed limit integrand.
    grid : TimeGrid
        Interval midpoints carry the samples; weights are the exact
        ``(T - t) dt`` interval masses.
    weights : list of (label, callable), optional
        Defaults to :func:`dyadic_weights` on ``[0, T]``.
    time_independent : bool
        Also run the translation diagnostic on the extrapolated integrand.
    """
    n_list = sorted(int(n) for n in n_list)
    ns = np.array(n_list, dtype=float)
    rng = np.random.default_rng(seed)
    weights = weights if weights is not None else dyadic_weights(grid.T)
    t, mu = grid.mids, grid.mu_weights
    probes = _trajectory_probes(grid, dim, n_probes, rng)
    perturb = [rng.standard_normal((grid.N, dim)) for _ in range(2)]

    # coercivity witness on the slice values
    pts = np.vstack(probes)
    tt = np.tile(t, len(probes))
    vals = [integrand(n, tt, pts) for n in n_list]
    r2 = np.sum(pts * pts, axis=1)
    far = r2 >= 1.0
    c1 = min(float((v[far] / r2[far]).min()) for v in vals) if np.any(far) else math.inf
    if not c1 > 0 or not all(np.all(np.isfinite(v)) for v in vals):
        raise CoercivityError(f"integrand witness violated (C1 = {c1})")

    per_weight = []
    worst_li = worst_re = 0.0
    wit_li, wit_re = {}, {}
    scale = 1.0
    for label, xi in weights:
        q = mu * xi(t)

        def weighted(fvals, q=q):
            return float(q @ fvals)

        li, re, lims = 0.0, 0.0, []
        dev = np.zeros(len(n_list))
        for p, W in enumerate(probes):
            target = weighted(limit(t, W))
            scale = max(scale, 1.0 + abs(target))
            lims.append(target)
            for k, E in enumerate([None] + perturb):
                seq_vals = [weighted(integrand(n, t, W if E is None else W + E / n)) for n in n_list]
                if E is None:
                    dev = np.maximum(dev, np.abs(np.array(seq_vals) - target))
                est = tail_limit(ns, seq_vals)
                d = target - est
                if d > li:
                    li = d
                if d > worst_li:
                    worst_li = d
                    wit_li = {"weight": label, "probe": p, "sequence": "constant" if E is None else f"perturbed{k}", "deficit": d}
                if E is None:
                    e = est - target
                    re = max(re, e)
                    if e > worst_re:
                        worst_re, wit_re = e, {"weight": label, "probe": p, "sequence": "constant", "deficit": e}
        per_weight.append(
            {"weight": label, "liminf_deficit": li, "recovery_deficit": re, "limit_values": lims, "deviation": dev}
        )

    thr = tol * scale
    worst_dev = np.max([pw["deviation"] for pw in per_weight], axis=0)
    rate, _ = fit_rate(n_list, worst_dev) if len(n_list) >= 4 else (math.nan, math.nan)
    diagnostics = {"coercivity_C1": c1, "deviation_last": float(worst_dev[-1]), "deviation_rate": rate}
    if time_independent:
        xs = np.linspace(-2.0, 2.0, 9)
        X = np.array(np.meshgrid(*([xs] * dim))).reshape(dim, -1).T if dim > 1 else xs[:, None]
        spread = 0.0
        for x in X:
            W = np.tile(x, (len(t), 1))
            ext = np.array([tail_limit(ns, [integrand(n, t[i : i + 1], W[i : i + 1])[0] for n in n_list]) for i in range(len(t))])
            spread = max(spread, float(ext.max() - ext.min()))
        diagnostics["translation_spread"] = spread
        diagnostics["translation_ok"] = bool(spread <= thr)
    return GammaVerdict(
        liminf_ok=bool(worst_li <= thr),
        recovery_ok=bool(worst_re <= thr),
        liminf_deficit=worst_li,
        liminf_witness=wit_li,
        recovery_deficit=worst_re,
        recovery_witness=wit_re,
        weights_tested=[lab for lab, _ in weights],
        tol=thr,
        seed=seed,
        n_list=n_list,
        diagnostics=diagnostics,
        per_weight=per_weight,
    )


# ---------------------------------------------------------------------------
# Stability experiments
# ---------------------------------------------------------------------------


def fit_rate(ns, distances):
    """Least-squares slope of ``log d`` against ``log n`` over the last half.

    Returns ``(rate, residual)`` with ``rate = -slope`` and the RMS fit
    residual. Zero distances give ``rate = inf`` (exact agreement).
    """
    ns = np.asarray(ns, dtype=float)
    d = np.asarray(distances, dtype=float)
    half = len(ns) // 2
    x, y = ns[half:], d[half:]
    if np.all(y == 0):
        return math.inf, 0.0
    if np.any(y <= 0) or len(x) < 2:
        return math.nan, math.nan
    X, Y = np.log(x), np.log(y)
    slope, icpt = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + icpt)) ** 2)))
    return float(-slope), resid


def _graph_gap(op_n, op, box, density):
    """Largest interval-hull distance between ``op_n(v)`` and ``op(v)`` on a lattice."""
    worst = 0.0
    for v in lattice(box, density):
        a = np.array(op_n.apply(v))
        b = np.array(op.apply(v))
        if a.size == 0 or b.size == 0:
            if a.size != b.size:
                return math.inf
            continue
        gap = np.maximum(np.abs(a.min(axis=0) - b.min(axis=0)), np.abs(a.max(axis=0) - b.max(axis=0)))
        worst = max(worst, float(gap.max()))
    return worst


@dataclass
class StabilityReport:
    kind: str
    n_list: list
    distances: np.ndarray
    null_min_distances: np.ndarray
    null_min_values: np.ndarray
    rate: float
    rate_residual: float
    limit_functional: float
    graph_gaps: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        """One row per ``n``: distance, null-min distance, value, graph gap."""
        return [
            (n, float(d), float(dn), float(v), float(g))
            for n, d, dn, v, g in zip(self.n_list, self.distances, self.null_min_distances, self.null_min_values, self.graph_gaps)
        ]

    def plot_data(self):
        return [(n, float(d)) for n, d in zip(self.n_list, self.distances)]


def _extrapolate(n1, x1, n2, x2):
    """Remove the ``1/n`` term: ``(n2 x2 - n1 x1) / (n2 - n1)``."""
    return (n2 * x2 - n1 * x1) / (n2 - n1)


def _run(family, limit_problem, n_list, null_min, config, graph_box):
    ref_lim = solve_reference(limit_problem)
    dist, dist_nm, vals, gaps, sols = [], [], [], [], []
    for n in n_list:
        P = family(n)
        if P.grid != limit_problem.grid:
            raise ValueError("family members must share the limit problem's grid")
        try:
            ref = solve_reference(P)
        except FitzflowError as exc:
            raise FitzflowError(f"member n={n} is unsolvable: {exc}") from exc
        dist.append(relative_l2(ref.u, ref_lim.u))
        if null_min:
            res = solve_null_min(P, config=config)
            dist_nm.append(relative_l2(res.u, ref_lim.u))
            vals.append(res.value.total)
            sols.append(res.solution)
        else:
            dist_nm.append(math.nan)
            vals.append(math.nan)
            sols.append(ref)
        gaps.append(_graph_gap(P.op, limit_problem.op, graph_box, 9) if graph_box is not None else math.nan)
    return ref_lim, np.array(dist), np.array(dist_nm), np.array(vals), np.array(gaps), sols


def _limit_functional(limit_problem, n_list, sols):
    n1, n2 = n_list[-2], n_list[-1]
    s1, s2 = sols[-2], sols[-1]
    grid = limit_problem.grid
    u = Trajectory(grid, _extrapolate(n1, s1.u.values, n2, s2.u.values))
    if limit_problem.kind == "MM":
        sol = FlowSolution("MM", u)
    else:
        aux = Trajectory(grid, _extrapolate(n1, s1.aux.values, n2, s2.aux.values))
        sol = FlowSolution(limit_problem.kind, u, aux)
        if limit_problem.kind == "DNE1":
            # extrapolated w must start at the limit datum
            sol.aux.values[0] = limit_problem.w0
        else:
            sol.u.values[0] = limit_problem.u0
    return evaluate_functional(limit_problem, sol).total, sol


def stability_experiment(family, limit_problem, n_list, null_min=True, config=None, graph_box=((-2.0,), (2.0,))):
    """Perturbation experiment ``P_n -> P`` for maximal monotone flows.

    Parameters
    ----------
    family : callable
        ``n -> FlowProblem`` (kind ``"MM"``), all on the limit problem's grid.
    limit_problem : FlowProblem
    n_list : sequence of int
    null_min : bool
        Also solve every member by null-minimization; the limit functional is
        then evaluated at the extrapolation of the null-min solutions.
    graph_box : tuple or None
        Lattice box for the operator graph gap diagnostic.

    Returns
    -------
    StabilityReport
        Distances are relative L2-in-time between reference solutions.
    """
    if limit_problem.kind != "MM":
        raise ValueError("use dne_stability_experiment for doubly nonlinear families")
    n_list = sorted(int(n) for n in n_list)
    box = graph_box if graph_box is not None and limit_problem.dim == len(graph_box[0]) else None
    _, dist, dist_nm, vals, gaps, sols = _run(family, limit_problem, n_list, null_min, config, box)
    rate, resid = fit_rate(n_list, dist)
    lf, _ = _limit_functional(limit_problem, n_list, sols)
    return StabilityReport("MM", n_list, dist, dist_nm, vals, rate, resid, lf, gaps)


def dne_stability_experiment(kind, family, limit_problem, n_list, null_min=True, config=None, probe_box=((-2.0,), (2.0,))):
    """As :func:`stability_experiment` for DNE1/DNE2 families.

    Also records Gamma-diagnostics of ``gamma_n -> gamma`` and
    ``gamma_n* -> gamma*`` on ``probe_box`` (liminf and recovery deficits).
    """
    if kind not in ("DNE1", "DNE2") or limit_problem.kind != kind:
        raise ValueError(f"expected a {kind} limit problem")
    n_list = sorted(int(n) for n in n_list)
    box = probe_box if limit_problem.dim == len(probe_box[0]) else None
    _, dist, dist_nm, vals, gaps, sols = _run(family, limit_problem, n_list, null_min, config, box)
    rate, resid = fit_rate(n_list, dist)
    lf, _ = _limit_functional(limit_problem, n_list, sols)
    diag = {}
    if box is not None:
        n_max = n_list[-1]
        gseq = FnSequence(lambda n: family(n).gamma, limit_problem.gamma, n_max, "gamma_n")
        cseq = FnSequence(lambda n: family(n).gamma.conjugate(), limit_problem.gamma.conjugate(), n_max, "gamma_n*")
        for name, seq in (("gamma", gseq), ("gamma_conj", cseq)):
            # dense indices: the extrapolation needs a well-sampled tail
            v = gamma_check_static(seq, box, range(1, n_max + 1), density=9, n_dirs=2)
            diag[f"{name}_liminf_ok"] = v.liminf_ok
            diag[f"{name}_recovery_ok"] = v.recovery_ok
    return StabilityReport(kind, n_list, dist, dist_nm, vals, rate, resid, lf, gaps, diag)
