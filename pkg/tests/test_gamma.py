import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitzflow.convex import HalfNormSq, Quadratic, Zero
from fitzflow.flows import FlowProblem, TimeGrid
from fitzflow.gamma import (
    CoercivityError,
    FnSequence,
    coercivity_witness,
    dyadic_weights,
    evolutionary_gamma_check,
    fit_rate,
    gamma_check_static,
    kuratowski_diagnostic,
    stability_experiment,
    tail_limit,
)
from fitzflow.exceptions import FitzflowError
from fitzflow.operators import Identity, LinearSPD, Scaled
from fitzflow.representatives import Fb, FitzpatrickLinear

NS = list(range(1, 33))


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5))
def test_tail_limit_exact_on_quadratics_in_inverse_n(a, b, c):
    vals = [a + b / n + c / n**2 for n in NS]
    assert tail_limit(NS, vals) == pytest.approx(a, abs=1e-8 * (1 + abs(a) + abs(b) + abs(c)))


def test_tail_limit_averages_oscillation():
    vals = [1.0 + 0.5 * (-1) ** n for n in NS]
    assert abs(tail_limit(NS, vals) - 1.0) <= 0.1


def test_tail_limit_infinite_and_short():
    assert math.isinf(tail_limit(NS, [1.0] * 31 + [math.inf]))
    assert tail_limit([1, 2, 3], [3.0, 2.0, 1.0]) == 1.0


@given(p=st.floats(0.5, 3.0), c=st.floats(0.1, 10.0))
def test_fit_rate_recovers_power(p, c):
    ns = [2**k for k in range(1, 9)]
    rate, resid = fit_rate(ns, [c * n ** (-p) for n in ns])
    assert rate == pytest.approx(p, abs=1e-9) and resid <= 1e-9


def test_fit_rate_zero_distances():
    assert fit_rate([1, 2, 4, 8], [0, 0, 0, 0])[0] == math.inf


def test_coercivity_witness():
    seq = FnSequence(lambda n: Quadratic(1 + 1 / n), Quadratic(1.0), 64)
    P = np.linspace(-3, 3, 13)[:, None]
    c1, c2, c3 = coercivity_witness(seq, P, NS)
    assert c1 >= 1.0 and c2 <= 2.0 + 1e-12 and c3 <= 2.0
    with pytest.raises(CoercivityError):
        coercivity_witness(FnSequence(lambda n: Zero(1), Zero(1), 64), P, NS)


def test_sequence_index_and_generator_errors():
    seq = FnSequence(lambda n: Quadratic(1 / (n - 3)), Quadratic(1.0), 8)
    with pytest.raises(IndexError):
        seq(9)
    with pytest.raises(FitzflowError):
        seq(3)


def test_static_uniform_convergence_passes():
    seq = FnSequence(lambda n: Quadratic(1 + 1 / n), Quadratic(1.0), 64)
    v = gamma_check_static(seq, ([-2.0], [2.0]), NS)
    assert v.ok and v.liminf_deficit <= v.tol


def test_static_wrong_limits_detected():
    too_big = FnSequence(lambda n: Quadratic(1 + 1 / n), Quadratic(2.0), 64)
    assert not gamma_check_static(too_big, ([-2.0], [2.0]), NS).liminf_ok
    too_small = FnSequence(lambda n: Quadratic(1 + 1 / n), Quadratic(0.5), 64)
    v = gamma_check_static(too_small, ([-2.0], [2.0]), NS)
    assert v.liminf_ok and not v.recovery_ok


def test_static_representatives_and_rows():
    seq = FnSequence(lambda n: Fb(0.5 + 1 / n), Fb(0.5), 64)
    v = gamma_check_static(seq, ([-1.0, -1.0], [1.0, 1.0]), NS, density=5)
    assert v.ok
    keys = [k for k, _ in v.rows()]
    assert keys[:4] == ["liminf_ok", "liminf_deficit", "recovery_ok", "recovery_deficit"]


def test_kuratowski_converging_family():
    seq = FnSequence(lambda n: FitzpatrickLinear([[1 + 1 / n]]), FitzpatrickLinear([[1.0]]), 64)
    rpt = kuratowski_diagnostic(seq, np.linspace(-1, 1, 5), (-3.0, 3.0), [8, 16, 32, 64])
    assert rpt.converges and rpt.upper_inclusion
    assert rpt.lower_distance[-1] < rpt.lower_distance[0]


def test_dyadic_weights_partition():
    w = dyadic_weights(2.0)
    assert len(w) == 18
    t = np.linspace(0, 2, 101)
    total = sum(f(t) for _, f in w[:16])
    assert np.all(total == 1.0)


def _scaled(n, t, W):
    return (1 + 1 / n) * np.sum(W * W, axis=1)


def _oscillatory(n, t, W):
    return (1 + np.sin(2 * np.pi * n * t) / n) * np.sum(W * W, axis=1)


def _limit(t, W):
    return np.sum(W * W, axis=1)


def test_evolutionary_scaled_passes_with_translation():
    v = evolutionary_gamma_check(_scaled, _limit, NS, TimeGrid(1.0, 32), time_independent=True)
    assert v.ok and v.diagnostics["translation_ok"]
    assert v.diagnostics["deviation_rate"] == pytest.approx(1.0, abs=0.05)


def test_evolutionary_oscillatory_within_shrinking_tolerance():
    ns = list(range(1, 65))
    v = evolutionary_gamma_check(_oscillatory, _limit, ns, TimeGrid(1.0, 64), tol=1.0 / ns[-1])
    assert v.ok and v.diagnostics["deviation_rate"] >= 1.0


def test_evolutionary_wrong_limit_fails():
    v = evolutionary_gamma_check(_scaled, lambda t, W: 2 * _limit(t, W), NS, TimeGrid(1.0, 16))
    assert not v.liminf_ok


def test_evolutionary_coercivity_failure():
    with pytest.raises(CoercivityError):
        evolutionary_gamma_check(lambda n, t, W: 0 * W[:, 0], _limit, NS, TimeGrid(1.0, 8))


def test_stability_linear_rate():
    grid = TimeGrid(1.0, 32)
    lim = FlowProblem("MM", Identity(1), grid, u0=[1.0])
    rpt = stability_experiment(
        lambda n: FlowProblem("MM", Scaled(Identity(1), 1 + 1 / n), grid, u0=[1.0]), lim, [2, 4, 8, 16, 32, 64], null_min=False
    )
    assert 0.9 <= rpt.rate <= 1.1
    assert len(rpt.rows()) == 6 and rpt.plot_data()[0][0] == 2
    assert np.all(rpt.graph_gaps > 0)


def test_stability_rejects_grid_mismatch():
    lim = FlowProblem("MM", Identity(1), TimeGrid(1.0, 8), u0=[1.0])
    with pytest.raises(ValueError):
        stability_experiment(lambda n: FlowProblem("MM", Identity(1), TimeGrid(1.0, 16), u0=[1.0]), lim, [1, 2])
