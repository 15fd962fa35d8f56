import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitzflow import operators
from fitzflow.convex import AbsPower, HalfNormSq, PiecewiseQuadratic1D
from fitzflow.exceptions import NotMaximalError
from fitzflow.operators import (
    GraphSample,
    Identity,
    LinearSPD,
    Modulation,
    OnlyAtZero,
    PLaplacian1D,
    Sign1D,
    Subdifferential,
    TimeDependent,
    graph_sample,
    random_graph_sample,
    resolvent_residual,
)

PWQ = PiecewiseQuadratic1D([-1.0, 1.0], [(0.0, -1.0, -0.5), (0.5, 0.0, 0.0), (0.0, 1.5, -1.0)])
SCALAR_OPS = [
    Identity(1),
    LinearSPD([[3.0]]),
    Sign1D(),
    Subdifferential(AbsPower(3.0)),
    Subdifferential(AbsPower(1.0)),
    Subdifferential(PWQ),
    operators.Scaled(Sign1D(), 2.0),
    operators.Shifted(Identity(1), 0.5, -0.25),
    operators.Sum(Identity(1), LinearSPD([[2.0]])),
]


def test_sign_resolvent_is_soft_threshold():
    op = Sign1D()
    for r, x in ((2.0, 1.5), (-0.3, 0.0), (0.5, 0.0), (-1.0, -0.5)):
        assert op.resolvent(0.5, [r])[0] == pytest.approx(x)


def test_linear_resolvent_solves_system():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = LinearSPD(A).resolvent(0.3, [1.0, -2.0])
    assert np.allclose(x + 0.3 * A @ x, [1.0, -2.0])


@given(r=st.floats(-5, 5), tau=st.floats(0.01, 3.0), k=st.integers(0, len(SCALAR_OPS) - 1))
def test_resolvent_residual_vanishes(r, tau, k):
    op = SCALAR_OPS[k]
    x = op.resolvent(tau, [r])
    assert resolvent_residual(op, tau, [r], x) <= 1e-8 * (1 + abs(r))


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), tau=st.floats(0.01, 3.0), k=st.integers(0, len(SCALAR_OPS) - 1))
def test_resolvent_is_nonexpansive(a, b, tau, k):
    op = SCALAR_OPS[k]
    xa, xb = op.resolvent(tau, [a]), op.resolvent(tau, [b])
    assert abs(xa[0] - xb[0]) <= abs(a - b) + 1e-9


@pytest.mark.parametrize("op", SCALAR_OPS, ids=repr)
def test_sampled_graphs_are_monotone(op):
    assert graph_sample(op, ([-3.0], [3.0]), 61).is_monotone()


def test_monotonicity_violation_detected():
    bad = GraphSample([[0.0], [1.0]], [[1.0], [0.0]])
    assert bad.monotonicity_violation() < 0 and not bad.is_monotone()


def test_non_maximal_have_no_resolvent():
    with pytest.raises(NotMaximalError):
        OnlyAtZero(1).resolvent(1.0, [0.0])
    assert OnlyAtZero(1).apply([1.0]) == []


def test_plaplacian_p2_is_linear_matrix():
    op = PLaplacian1D(2.0, 8)
    v = np.random.default_rng(0).normal(size=8)
    assert np.allclose(op.apply(v)[0], op.phi.matrix() @ v)


@given(s=st.floats(0.1, 3.0))
def test_plaplacian_homogeneity(s):
    op = PLaplacian1D(3.0, 6)
    v = np.linspace(-1, 1, 6) ** 3
    assert np.allclose(op.apply(s * v)[0], s**2 * op.apply(v)[0], rtol=1e-10)


def test_plaplacian_resolvent_residual():
    op = PLaplacian1D(3.0, 10)
    rhs = np.sin(np.arange(10.0))
    x = op.resolvent(0.05, rhs)
    assert resolvent_residual(op, 0.05, rhs, x) <= 1e-8


def test_time_dependent_needs_time():
    op = TimeDependent(Identity(1), Modulation("piecewise", [1.0, 2.0], [0.5]))
    with pytest.raises(ValueError):
        op.apply([1.0])
    assert op.apply([1.0], t=0.75)[0][0] == pytest.approx(2.0)


def test_graph_sample_csv_roundtrip():
    s = random_graph_sample(Subdifferential(HalfNormSq(2)), 10, seed=3)
    header, rows = s.to_csv_rows()
    back = GraphSample.from_csv_rows(header, rows)
    assert np.array_equal(back.v, s.v) and np.array_equal(back.vstar, s.vstar)


def test_from_description_roundtrip():
    for op in (Identity(2), Sign1D(), PLaplacian1D(3.0, 5)):
        again = operators.from_description(op.describe())
        assert again.describe() == op.describe()
