import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ergofit.errors import InvalidArgumentError
from ergofit.erm import (AuxiliaryLoss, FitResult, LossSpec, ObservedSeries, auxiliary_loss, empirical_risk,
                         estimator_sequence, fit, signal_of, signal_plus_noise)
from ergofit.families import make_identity_vs_chaos, make_logistic, make_rotation
from ergofit.meanwidth import NoiseModel, OptimizerConfig


def test_losses():
    sq, ab = LossSpec(), LossSpec("absolute")
    assert sq(1.0, 3.0) == 4.0 and ab(1.0, 3.0) == 2.0
    br = LossSpec("bregman", (0, 0, 1))
    u, v = np.linspace(-2, 2, 9), np.linspace(3, -1, 9)
    assert np.allclose(br(u, v), sq(u, v))
    assert LossSpec.from_dict(LossSpec("squared", offset=0.5).to_dict()) == LossSpec("squared", offset=0.5)
    with pytest.raises(InvalidArgumentError):
        LossSpec("huber")
    with pytest.raises(InvalidArgumentError):
        LossSpec("bregman", (0, 1))
    with pytest.raises(InvalidArgumentError):
        LossSpec(offset=-1.0)


def test_bregman_convexity_check():
    quartic = LossSpec("bregman", (0, 0, 0, 0, 1))
    assert quartic.check_convex(-3, 3)
    cubic = LossSpec("bregman", (0, 0, 0, 1))
    assert cubic.check_convex(0, 2) and not cubic.check_convex(-1, 1)
    fam = make_logistic(0, 3.5, resolution=4)
    with pytest.raises(InvalidArgumentError):
        fit(fam, np.full(10, 0.5), cubic)


def test_empirical_risk_by_hand():
    fam = make_identity_vs_chaos()
    y = np.array([0.5, 1.0, 0.0])
    assert empirical_risk(fam, (0,), 0.5, y, LossSpec()) == pytest.approx((0 + 0.25 + 0.25) / 3)
    assert empirical_risk(fam, (1,), 0.5, y, LossSpec()) == pytest.approx(0.0)


def test_rotation_fit_recovers_alpha():
    fam = make_rotation(1, resolution=10)
    y = signal_plus_noise({"kind": "orbit", "family": "rotation", "family_args": {"resolution": 10},
                           "theta": [0.3, 0], "x0": [0.0], "burn_in": 0}, {"kind": "gaussian", "sigma": 1e-9},
                          200, seed=0)
    res = fit(fam, y, search=OptimizerConfig(kind="grid", x_points=10))
    assert res.theta[0] == pytest.approx(0.3)
    assert res.risk < 1e-12


def test_identity_signal_refit_is_exact():
    fam = make_identity_vs_chaos()
    res = fit(fam, np.full(50, 0.3), search=OptimizerConfig(kind="grid+refine", x_points=11))
    assert res.theta == (0,)
    assert res.risk < 1e-12
    assert float(np.asarray(res.x)) == pytest.approx(0.3, abs=1e-6)


def test_budget_keeps_grid_monotone():
    fam = make_logistic(0, 3.5, resolution=8)
    y = signal_plus_noise({"kind": "orbit", "family": "logistic", "family_args": {"a_lo": 0, "a_hi": 3.5},
                           "theta": [3.2]}, {"kind": "gaussian", "sigma": 0.2}, 200, seed=1)
    risks = [fit(fam, y, search=OptimizerConfig(kind="grid", x_points=m)).risk for m in (5, 9, 17, 33)]
    assert all(b <= a + 1e-15 for a, b in zip(risks, risks[1:]))


@given(st.floats(0.01, 5.0))
def test_offset_does_not_move_argmin(offset):
    fam = make_logistic(0, 3.5, resolution=6)
    y = signal_plus_noise({"kind": "constant", "value": 0.4}, {"kind": "gaussian", "sigma": 0.1}, 60, seed=2)
    cfg = OptimizerConfig(kind="grid", x_points=9)
    a = fit(fam, y, LossSpec(), cfg)
    b = fit(fam, y, LossSpec(offset=offset), cfg)
    assert a.theta == b.theta
    assert b.risk == pytest.approx(a.risk + offset)


@pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0])
def test_true_model_risk_near_noise_variance(sigma):
    fam = make_logistic(0, 3.5, resolution=71)
    n = 4000
    y = signal_plus_noise({"kind": "orbit", "family": "logistic", "family_args": {"a_lo": 0, "a_hi": 3.5},
                           "theta": [3.2], "x0": 0.3, "burn_in": 1000}, {"kind": "gaussian", "sigma": sigma},
                          n, seed=3)
    V = signal_of(y)
    r = float(np.mean((V - y.y) ** 2))
    assert abs(r - sigma ** 2) <= 5 * sigma ** 2 * math.sqrt(2 / n)


def test_series_regenerates_bit_for_bit():
    y = signal_plus_noise({"kind": "constant", "value": 0.5}, {"kind": "uniform", "half_width": 1.0}, 100,
                          seed=7, key="abc")
    assert np.array_equal(y.y, y.regenerate().y)
    assert not np.array_equal(y.y, signal_plus_noise(**{**y.provenance, "key": "other"}).y)
    with pytest.raises(InvalidArgumentError):
        ObservedSeries([1.0, np.nan])
    with pytest.raises(InvalidArgumentError):
        ObservedSeries([1.0]).regenerate()


def test_estimator_sequence_trace():
    fam = make_logistic(0, 3.5, resolution=12)
    y = signal_plus_noise({"kind": "orbit", "family": "logistic", "family_args": {"a_lo": 0, "a_hi": 3.5},
                           "theta": [3.2]}, {"kind": "gaussian", "sigma": 0.1}, 400, seed=4)
    res = estimator_sequence(fam, y, None, [50, 100, 200, 400], OptimizerConfig(kind="grid", x_points=17))
    assert [t["n"] for t in res.trace] == [50, 100, 200, 400]
    run = [t["running_min"] for t in res.trace]
    assert all(b <= a for a, b in zip(run, run[1:]))
    for t in res.trace:
        assert t["risk"] == pytest.approx(empirical_risk(fam, t["theta"], t["x"], y.y[:t["n"]], LossSpec()))
    lines = res.trace_csv(names=["a"]).splitlines()
    assert lines[0] == "n,a_hat,risk" and len(lines) == 5
    assert '"risk"' in res.to_json()
    with pytest.raises(InvalidArgumentError):
        estimator_sequence(fam, y, None, [100, 50])
    with pytest.raises(InvalidArgumentError):
        estimator_sequence(fam, y, None, [500])


def test_restricted_parameter_list():
    fam = make_identity_vs_chaos()
    y = np.full(20, 0.5)
    res = fit(fam, y, thetas=[(1,)], search=OptimizerConfig(kind="grid", x_points=21))
    assert res.theta == (1,)
    with pytest.raises(InvalidArgumentError):
        fit(fam, y, thetas=[(1,)], random_starts=2)


def test_heavy_tail_warning():
    fam = make_identity_vs_chaos()
    y = np.zeros(2000)
    y[0] = 1e3
    with pytest.warns(RuntimeWarning, match="heavy-tailed"):
        res = fit(fam, y, thetas=[(0,)], search=OptimizerConfig(kind="grid", x_points=3))
    assert res.diagnostics["heavy_tailed"]


def test_squared_auxiliary_loss_is_exact():
    aux = auxiliary_loss(LossSpec(), NoiseModel("gaussian", 0.7))
    assert aux.exact
    val, se = aux.evaluate(np.array([0.0, 1.0]), np.array([0.5, -1.0]))
    assert np.allclose(val, [0.25 + 0.49, 4 + 0.49]) and np.all(se == 0)


@pytest.mark.parametrize("diff,sigma", [(0.0, 1.0), (0.5, 0.5), (2.0, 1.0)])
def test_absolute_auxiliary_loss_matches_folded_normal(diff, sigma):
    aux = auxiliary_loss(LossSpec("absolute"), NoiseModel("gaussian", sigma), mc_samples=200_000, seed=1)
    val, se = aux.evaluate(0.0, diff)
    exact = stats.foldnorm(abs(diff) / sigma, scale=sigma).mean()
    assert abs(float(val) - exact) <= 4 * float(se)


def test_auxiliary_loss_guards():
    with pytest.raises(InvalidArgumentError):
        auxiliary_loss(LossSpec("absolute"), NoiseModel("gaussian", 1.0), mc_samples=1)
    assert isinstance(auxiliary_loss(LossSpec("absolute"), NoiseModel("gaussian", 1.0), 10), AuxiliaryLoss)


def test_fit_result_dyadic_state_serializes():
    fam = make_logistic(4, 4)
    y = signal_plus_noise({"kind": "orbit", "family": "logistic", "family_args": {"a_lo": 4, "a_hi": 4},
                           "theta": [4.0]}, {"kind": "gaussian", "sigma": 0.3}, 128, seed=5)
    res = fit(fam, y, search=OptimizerConfig(kind="tracking"))
    assert isinstance(res, FitResult)
    d = res.to_dict()
    assert "risk" in d and d["theta"] == [4.0]
