import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitzflow import convex
from fitzflow.convex import (
    AbsPower,
    Affine,
    Ball,
    Box,
    GridConvexFn,
    HalfNormSq,
    Indicator,
    PiecewiseQuadratic1D,
    Point,
    Quadratic,
    Support,
    Zero,
    biconjugate_check,
    fenchel_young_gap,
    moreau_envelope,
)
from fitzflow.exceptions import NonConvexError

finite = st.floats(-3, 3, allow_nan=False)
PWQ = PiecewiseQuadratic1D([-1.0, 1.0], [(0.0, -1.0, -0.5), (0.5, 0.0, 0.0), (0.0, 1.5, -1.0)])

CATALOG = [
    Quadratic(0.7),
    HalfNormSq(1),
    AbsPower(1.0),
    AbsPower(1.5),
    AbsPower(4.0),
    Indicator(Box([-1.0], [0.5])),
    Indicator(Point([0.2])),
    Support(Box([-1.0], [2.0])),
    Zero(1),
    PWQ,
    Affine(AbsPower(3.0), scale=1.5, arg_scale=2.0, shift=0.4, tilt=-0.3, const=0.1),
]


def brute_conjugate(f, y, lo=-40.0, hi=40.0, n=400_001):
    x = np.linspace(lo, hi, n)
    fx = f.values(x[:, None])
    keep = np.isfinite(fx)
    return float(np.max(y * x[keep] - fx[keep]))


def test_quadratic_conjugate_closed_form():
    for b in (0.1, 1.0, 5.0):
        c = Quadratic(b).conjugate()
        assert isinstance(c, Quadratic) and c.b == pytest.approx(1 / (4 * b), rel=0, abs=0)


def test_abspower_conjugate_is_dual_exponent():
    c = AbsPower(3.0).conjugate()
    assert isinstance(c, AbsPower) and c.p == pytest.approx(1.5)
    assert isinstance(AbsPower(1.0, 2).conjugate(), Indicator)


def test_indicator_support_duality():
    box = Box([-1.0, 0.0], [2.0, 1.0])
    y = np.array([[1.0, -1.0], [-2.0, 3.0]])
    assert np.allclose(Indicator(box).conjugate().values(y), [2.0, 5.0])
    assert isinstance(Support(box).conjugate(), Indicator)
    ball = Ball([0.0, 0.0], 2.0)
    assert np.allclose(Indicator(ball).conjugate().values(y), 2 * np.linalg.norm(y, axis=1))


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: type(f).__name__)
def test_conjugate_matches_brute_force_sup(f):
    for y in (-1.3, -0.2, 0.0, 0.6, 1.4):
        exact = f.conjugate().values([[y]])[0]
        if math.isinf(exact):
            continue
        assert exact == pytest.approx(brute_conjugate(f, y), abs=1e-6)


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: type(f).__name__)
def test_biconjugate_recovers_function(f):
    P = np.linspace(-2.5, 2.5, 101)[:, None]
    assert biconjugate_check(f, P) <= 1e-12 * (1 + np.nanmax(np.abs(np.where(np.isfinite(f.values(P)), f.values(P), 0))))


@given(x=finite, y=finite, k=st.integers(0, len(CATALOG) - 1))
def test_fenchel_young_inequality(x, y, k):
    assert fenchel_young_gap(CATALOG[k], [x], [y]) >= -1e-10


@given(r=finite, tau=st.floats(0.01, 5.0), k=st.integers(0, len(CATALOG) - 1))
def test_prox_minimizes_moreau_objective(r, tau, k):
    f = CATALOG[k]
    try:
        p = f.prox(tau, [r])
    except NotImplementedError:
        return
    obj = lambda x: f.values(np.atleast_2d(x).T) + (x - r) ** 2 / (2 * tau)  # noqa: E731
    base = obj(np.array([p[0]]))[0]
    trial = p[0] + np.linspace(-0.05, 0.05, 41)
    assert np.all(obj(trial) >= base - 1e-9 * (1 + abs(base)))


def test_moreau_envelope_below_function_and_gradient_fd():
    f = AbsPower(1.0)
    X = np.linspace(-2, 2, 21)[:, None]
    val, grad = moreau_envelope(f, 0.1, X)
    assert np.all(val <= f.values(X) + 1e-12)
    h = 1e-6
    fd = (moreau_envelope(f, 0.1, X + h)[0] - moreau_envelope(f, 0.1, X - h)[0]) / (2 * h)
    assert np.allclose(fd, grad[:, 0], atol=1e-5)


def test_piecewise_quadratic_rejects_bad_data():
    with pytest.raises(NonConvexError):
        PiecewiseQuadratic1D([0.0], [(0.0, 1.0, 0.0), (0.0, 0.0, 0.0)])
    with pytest.raises(NonConvexError):
        PiecewiseQuadratic1D([0.0], [(0.0, 0.0, 0.0), (0.0, 0.0, 1.0)])


def test_piecewise_subdifferential_at_kink():
    sub = PWQ.subdifferential([1.0])
    slopes = sorted(float(s[0]) for s in sub.slopes)
    assert slopes[0] == pytest.approx(1.0) and slopes[-1] == pytest.approx(1.5)


def test_grid_conjugate_matches_discrete_sup():
    g = GridConvexFn.from_function(AbsPower(1.5).values, [-2.0], [2.0], 81)
    gs = g.conjugate()
    Y = gs.nodes()
    assert np.allclose(gs.nodal, g.discrete_conjugate_at(Y), atol=1e-12)


def test_grid_rejects_nonconvex_samples():
    with pytest.raises(NonConvexError):
        GridConvexFn([-1.0], [1.0], np.array([0.0, 1.0, 0.0]))


def test_grid_2d_biconjugate_within_bound():
    f = Quadratic(0.5, 2)
    g = GridConvexFn.from_function(f.values, [-2.0, -2.0], [2.0, 2.0], 21)
    assert biconjugate_check(g, g.nodes()) <= g.cell_bound()


@given(c=st.floats(0.2, 4.0), x=finite)
def test_scaled_conjugate(c, x):
    f = convex.Scaled(HalfNormSq(1), c)
    assert f.conjugate().values([[x]])[0] == pytest.approx(x * x / (2 * c), rel=1e-12, abs=1e-12)


def test_from_description_roundtrip():
    for f in (Quadratic(2.0), AbsPower(3.0), PWQ, Indicator(Box([-1.0], [1.0]))):
        g = convex.from_description(f.describe())
        X = np.linspace(-2, 2, 17)[:, None]
        assert np.array_equal(f.values(X), g.values(X))


def test_dirichlet_energy_gradient_equation():
    e = convex.PDirichletEnergy(3.0, 8)
    rng = np.random.default_rng(0)
    rhs = rng.normal(size=8)
    x = e.solve_gradient_equation(rhs[None], 2.0)[0]
    assert np.allclose(e.gradient(x[None])[0] + 2.0 * x, rhs, atol=1e-9)
