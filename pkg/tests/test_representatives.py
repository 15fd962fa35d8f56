import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitzflow import representatives as R
from fitzflow.convex import AbsPower, HalfNormSq, PiecewiseQuadratic1D, Quadratic
from fitzflow.operators import Identity, LinearSPD, Scaled, Shifted, Sign1D, Subdifferential, graph_sample
from fitzflow.representatives import (
    Fb,
    FenchelOfPotential,
    FitzIdentity,
    FitzpatrickLinear,
    default_rep,
    inf_convolution,
    inf_convolution_lattice,
    membership_check,
    null_gap,
    pairing,
    represented_graph,
    represents_check,
    self_dual_check,
    smoothed,
)

coord = st.floats(-3, 3, allow_nan=False)
PWQ = PiecewiseQuadratic1D([-1.0, 1.0], [(0.0, -1.0, -0.5), (0.5, 0.0, 0.0), (0.0, 1.5, -1.0)])
REPS = [
    FitzIdentity(1),
    FitzpatrickLinear([[2.0]]),
    Fb(0.5),
    Fb(2.0),
    FenchelOfPotential(HalfNormSq(1)),
    FenchelOfPotential(AbsPower(1.0)),
    FenchelOfPotential(PWQ),
    default_rep(Scaled(Sign1D(), 2.0)),
    default_rep(Shifted(Identity(1), 0.5, -1.0)),
    inf_convolution(Fb(0.5), Identity(1)),
]


@given(v=coord, s=coord, k=st.integers(0, len(REPS) - 1))
def test_representatives_dominate_pairing(v, s, k):
    assert REPS[k](v, s) >= v * s - 1e-9 * (1 + abs(v * s))


@given(v=coord, s=coord)
def test_fitzpatrick_is_smallest(v, s):
    # the Fitzpatrick function of the identity lies below every other representative of it
    fi = FitzIdentity(1)(v, s)
    assert fi <= Fb(0.5)(v, s) + 1e-12
    assert fi <= FenchelOfPotential(HalfNormSq(1))(v, s) + 1e-12


@given(v=coord, s=coord)
def test_graph_fitzpatrick_below_closed_form(v, s):
    sample = graph_sample(Identity(1), ([-3.0], [3.0]), 31)
    assert R.fitzpatrick_of(sample)(v, s) <= FitzIdentity(1)(v, s) + 1e-12


def test_fb_membership_threshold():
    box = ([-2.0], [2.0])
    assert membership_check(Fb(0.5), box).ok
    assert not membership_check(Fb(0.4), box).ok


def test_fb_one_represents_only_origin():
    rpt = represents_check(Fb(1.0), Identity(1), ([-1.0], [1.0]), 21)
    assert rpt.domination_ok and not rpt.represents


@pytest.mark.parametrize("g", [Fb(0.5), FenchelOfPotential(HalfNormSq(1)), FenchelOfPotential(AbsPower(3.0))], ids=repr)
def test_self_dual_fenchel_type(g):
    P = np.linspace(-2, 2, 9)
    V, S = np.meshgrid(P, P)
    assert self_dual_check(g, V.reshape(-1, 1), S.reshape(-1, 1)) <= 1e-12


def test_transported_conjugate_matches_lattice():
    g = FitzIdentity(1)
    h = g.transported_conjugate()
    lat = R.LatticeConjugate(g, ([-4.0], [4.0]), 161)
    P = np.linspace(-1, 1, 5)
    V, S = (a.reshape(-1, 1) for a in np.meshgrid(P, P))
    fin = np.isfinite(h.evaluate(V, S))
    assert np.allclose(h.evaluate(V, S)[fin], lat.evaluate(V, S)[fin], atol=2e-2)
    assert np.all(lat.evaluate(V, S) <= h.evaluate(V, S) + 1e-12)


@given(v=st.floats(-2, 2), s=st.floats(-2, 2), k=st.sampled_from([0, 1, 2, 3, 4, 8, 9]))
def test_gradient_matches_finite_differences(v, s, k):
    g = REPS[k]
    gv, gs = g.grad([[v]], [[s]])
    h = 1e-6
    fv = (g(v + h, s) - g(v - h, s)) / (2 * h)
    fs = (g(v, s + h) - g(v, s - h)) / (2 * h)
    assert gv[0, 0] == pytest.approx(fv, abs=1e-5) and gs[0, 0] == pytest.approx(fs, abs=1e-5)


@given(v=coord, s=coord)
def test_smoothing_is_lower_and_converges(v, s):
    g = FenchelOfPotential(AbsPower(1.0))
    exact = g(v, s)
    coarse, fine = smoothed(g, 0.1)(v, s), smoothed(g, 1e-4)(v, s)
    if np.isfinite(exact):
        assert coarse <= fine + 1e-12 <= exact + 2e-12
        assert exact - fine <= 1e-3
    else:
        assert fine > coarse - 1e-12


def test_lattice_inf_convolution_matches_closed_form():
    closed = inf_convolution(Fb(0.5), Identity(1))
    lat = inf_convolution_lattice(Fb(0.5), FitzIdentity(1), (-6.0, 6.0), 2401)
    P = np.linspace(-1.5, 1.5, 7)
    V, S = (a.reshape(-1, 1) for a in np.meshgrid(P, P))
    # the lattice version is a representative of the same sum, so both vanish on v* = 2v
    on = np.linspace(-1, 1, 5)[:, None]
    assert np.allclose(lat.evaluate(on, 2 * on) - pairing(on, 2 * on), 0.0, atol=1e-4)
    assert np.all(lat.evaluate(V, S) >= pairing(V, S) - 1e-9)
    assert np.allclose(closed.evaluate(on, 2 * on), pairing(on, 2 * on), atol=1e-12)


def test_represented_graph_of_fb_half_is_identity():
    vs, j = represented_graph(Fb(0.5), (-4.0, 4.0), np.linspace(-2, 2, 9))
    assert np.allclose(vs, np.linspace(-2, 2, 9), atol=1e-6) and np.all(np.abs(j) <= 1e-10)


def test_null_gap_zero_on_graph():
    g = default_rep(Subdifferential(Quadratic(1.5)))
    x = np.linspace(-1, 1, 11)[:, None]
    assert np.allclose(null_gap(g, x, 3.0 * x), 0.0, atol=1e-12)


def test_default_rep_for_linear_spd():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    g = default_rep(LinearSPD(A))
    rng = np.random.default_rng(0)
    V = rng.normal(size=(20, 2))
    assert np.allclose(g.evaluate(V, V @ A.T), pairing(V, V @ A.T), atol=1e-12)


def test_from_description_roundtrip():
    for g in (Fb(0.7), FitzIdentity(2), FenchelOfPotential(AbsPower(3.0))):
        h = R.from_description(g.describe())
        V = np.linspace(-1, 1, 6).reshape(-1, g.dim) if g.dim == 1 else np.ones((3, 2))
        assert np.allclose(h.evaluate(V, -V), g.evaluate(V, -V))
