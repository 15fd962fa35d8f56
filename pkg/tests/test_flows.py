import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fitzflow.convex import AbsPower, HalfNormSq, Quadratic
from fitzflow.flows import (
    FlowProblem,
    OptimizerConfig,
    Source,
    TimeGrid,
    Trajectory,
    ben_functional,
    ben_weighted_functional,
    dne1_functional,
    dne2_functional,
    evaluate_functional,
    relative_l2,
    solve_null_min,
    solve_reference,
    stopping_time,
    weighted_pairing,
)
from fitzflow.operators import Identity, LinearSPD, PLaplacian1D, Sign1D, Subdifferential

N = 16
GRID = TimeGrid(1.0, N)
paths = arrays(np.float64, N, elements=st.floats(-2, 2, allow_nan=False))


def path_from(u0, tail):
    return Trajectory(GRID, np.concatenate([[u0], tail]))


def test_grid_weights():
    g = TimeGrid(2.0, 10)
    assert g.tau_weights.sum() == pytest.approx(2.0)
    assert g.mu_weights.sum() == pytest.approx(2.0)  # int_0^T (T - t) dt = T^2 / 2
    assert g.trap_weights.sum() == pytest.approx(2.0)


def test_trajectory_basics():
    v = Trajectory.from_function(GRID, lambda t: [t, 2 * t])
    assert np.allclose(v.derivative, [[1.0, 2.0]])
    assert v.coarsen().grid.N == N // 2
    assert np.allclose(v.at(0.3), [[0.3, 0.6]])
    with pytest.raises(ValueError):
        Trajectory(GRID, np.full(N + 1, np.nan))


def test_source_constructors():
    s = Source.constant([1.0, 2.0]).plus(Source.constant([0.5, 0.5]))
    assert np.allclose(s([0.0, 1.0]), [[1.5, 2.5]] * 2)
    nod = Source.nodal(GRID, np.linspace(0, 1, N + 1))
    assert np.allclose(nod([0.25]), [[0.25]])
    assert Source.from_scalar(np.sin)([0.0]).shape == (1, 1)


def test_reference_identity_is_implicit_euler():
    sol = solve_reference(FlowProblem("MM", Identity(1), GRID, u0=[1.0]))
    k = np.arange(N + 1)
    assert np.allclose(sol.u.values[:, 0], (1 + GRID.tau) ** (-k.astype(float)), atol=1e-14)


def test_reference_sign_stops():
    sol = solve_reference(FlowProblem("MM", Sign1D(), TimeGrid(2.0, 40), u0=[1.0]))
    assert stopping_time(sol.u) == pytest.approx(1.0)


@given(tail=paths, k=st.integers(0, 2))
def test_ben_functional_nonnegative(tail, k):
    op = [Identity(1), Sign1D(), Subdifferential(AbsPower(3.0))][k]
    P = FlowProblem("MM", op, GRID, Source.constant([0.2]), u0=[1.0])
    val = ben_functional(P, path_from(1.0, tail))
    assert val.total >= -1e-10 * (1 + abs(val.rep_part))
    assert np.all(val.gaps >= -1e-10)


def test_ben_functional_infinite_off_start():
    P = FlowProblem("MM", Identity(1), GRID, u0=[1.0])
    assert math.isinf(ben_functional(P, Trajectory.constant(GRID, [0.5])).total)


def test_functional_at_reference_is_second_order():
    vals = []
    for n in (16, 32, 64, 128):
        P = FlowProblem("MM", Identity(1), TimeGrid(1.0, n), u0=[1.0])
        vals.append(ben_functional(P, solve_reference(P).u).total)
    ratios = [a / b for a, b in zip(vals, vals[1:])]
    assert all(3.6 <= r <= 4.4 for r in ratios)


def test_weighted_functional_consistent_with_pairing_identity():
    P = FlowProblem("MM", Identity(1), GRID, u0=[1.0])
    ref = solve_reference(P).u
    val = ben_weighted_functional(P, ref)
    assert val.total >= -1e-3 and val.total <= ben_functional(P, ref).total + 1e-2


@given(tail=paths, z=arrays(np.float64, N, elements=st.floats(-2, 2)))
def test_dne_fenchel_block_nonnegative(tail, z):
    P1 = FlowProblem("DNE1", Identity(1), GRID, w0=[1.0], gamma=Quadratic(0.7))
    v1 = dne1_functional(P1, z[:, None], path_from(1.0, tail))
    assert v1.blocks[0] >= -1e-12 and v1.total >= v1.blocks[0] - 1e-12
    P2 = FlowProblem("DNE2", Identity(1), GRID, u0=[1.0], gamma=Quadratic(0.7))
    v2 = dne2_functional(P2, path_from(1.0, tail), z[:, None])
    assert v2.blocks[0] >= -1e-12


@pytest.mark.parametrize("kind", ["DNE1", "DNE2"])
def test_dne_reference_functional_small(kind):
    kw = {"w0": [1.0]} if kind == "DNE1" else {"u0": [1.0]}
    P = FlowProblem(kind, Identity(1), TimeGrid(1.0, 128), Source.constant([0.3]), gamma=HalfNormSq(1), **kw)
    assert evaluate_functional(P, solve_reference(P)).total <= 1e-3


def test_null_min_matches_reference_for_power_gradient():
    P = FlowProblem("MM", Subdifferential(AbsPower(3.0)), TimeGrid(1.0, 64), Source.constant([0.1]), u0=[1.5])
    res = solve_null_min(P)
    assert res.converged and res.solution.meta["method"] == "fista"
    assert relative_l2(res.u, solve_reference(P).u) <= 1e-2


def test_null_min_plaplacian_first_order_agreement():
    # the two discretizations differ by O(tau)
    gaps = []
    for n in (32, 64):
        P = FlowProblem("MM", PLaplacian1D(3.0, 8), TimeGrid(0.1, n), u0=np.sin(np.pi * np.arange(1, 9) / 9))
        res = solve_null_min(P)
        assert res.converged
        gaps.append(relative_l2(res.u, solve_reference(P).u))
    assert gaps[1] <= 0.03 and 1.8 <= gaps[0] / gaps[1] <= 2.2


def test_null_min_two_dimensional_linear():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    P = FlowProblem("MM", LinearSPD(A), TimeGrid(1.0, 32), u0=[1.0, -1.0])
    res = solve_null_min(P)
    assert relative_l2(res.u, solve_reference(P).u) <= 1e-2


def test_null_min_reports_nonconvergence():
    P = FlowProblem("MM", Identity(1), TimeGrid(1.0, 64), u0=[1.0])
    res = solve_null_min(P, config=OptimizerConfig(max_iter=3, tol_abs=1e-14))
    assert not res.converged and res.iterations <= 3


def test_weighted_pairing_direct_route_exact_on_linear_paths():
    v = Trajectory.from_function(TimeGrid(1.0, 8), lambda t: [2 * t - 1])
    assert weighted_pairing(v, "direct") == pytest.approx(-1 / 3, abs=1e-12)
    # the trapezoid route is off by O(tau^2) and Richardson removes it
    assert abs(weighted_pairing(v, "identity") + 1 / 3) > 1e-4
    assert weighted_pairing(v, "identity", richardson=True) == pytest.approx(-1 / 3, abs=1e-12)


def test_stopping_time_never_rests():
    assert math.isinf(stopping_time(Trajectory.constant(GRID, [1.0])))
    assert stopping_time(Trajectory.constant(GRID, [0.0])) == 0.0


def test_problem_validation():
    with pytest.raises(ValueError):
        FlowProblem("DNE1", Identity(1), GRID, u0=[1.0], gamma=HalfNormSq(1))
    with pytest.raises(ValueError):
        FlowProblem("DNE2", Identity(1), GRID, u0=[1.0])
    with pytest.raises(ValueError):
        FlowProblem("XX", Identity(1), GRID, u0=[1.0])


def test_sampled_fitzpatrick_uses_subgradient_path():
    from fitzflow.operators import graph_sample
    from fitzflow.representatives import fitzpatrick_of

    P = FlowProblem("MM", Identity(1), TimeGrid(1.0, 32), u0=[1.0])
    rep = fitzpatrick_of(graph_sample(Identity(1), ([-2.0], [2.0]), 201))
    res = solve_null_min(P, rep=rep)
    default = 1e-4 * P.data_scale() * P.grid.tau
    assert res.solution.meta["method"] == "polyak" and res.tol_abs == pytest.approx(2 * default)
    assert res.converged and relative_l2(res.u, solve_reference(P).u) <= 1e-2
