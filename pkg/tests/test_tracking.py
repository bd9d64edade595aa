import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergofit.errors import InvalidArgumentError, PrecisionError
from ergofit.tracking import (ORACLE_MAX_N, inverse_branches, track_doubling, track_noise,
                              tracking_oracle_logistic4, window_values)


def forward(x0, n):
    out, x = [], x0
    for _ in range(n):
        out.append(x)
        x = 4.0 * x * (1.0 - x)
    return np.array(out)


def test_all_positive_noise_sits_near_fixed_point():
    x0, value, u = tracking_oracle_logistic4(np.ones(20))
    assert abs(x0 - 0.75) < 1e-6
    assert np.all(u >= 0.5)
    assert value == pytest.approx(u.sum())


def test_alternating_noise_value():
    eps = np.array([1.0, -1.0] * 4)
    _, value, u = tracking_oracle_logistic4(eps)
    assert value >= 2.0
    assert np.all(u[::2] >= 0.5) and np.all(u[1::2] <= 0.5)


def test_all_negative_noise_stays_low():
    _, _, u = tracking_oracle_logistic4(-np.ones(12))
    assert np.all(u <= 0.5)


@given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=ORACLE_MAX_N))
def test_side_conditions_exact(signs):
    eps = np.array(signs)
    _, _, u = tracking_oracle_logistic4(eps)
    assert np.all(np.where(eps > 0, u >= 0.5, u <= 0.5))


@given(st.lists(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=24))
def test_forward_recomputation_short_horizons(vals):
    eps = np.array(vals)
    x0, _, u = tracking_oracle_logistic4(eps)
    assert np.max(np.abs(forward(x0, eps.size) - u)) <= 1e-6


def test_precision_guard():
    with pytest.raises(PrecisionError):
        tracking_oracle_logistic4(np.ones(ORACLE_MAX_N + 1))
    with pytest.raises(InvalidArgumentError):
        tracking_oracle_logistic4([])


@given(st.floats(0, 1))
def test_inverse_branches_are_preimages(w):
    lo, hi = inverse_branches(w)
    assert lo <= 0.5 <= hi
    assert 4 * lo * (1 - lo) == pytest.approx(w, abs=1e-12)
    assert 4 * hi * (1 - hi) == pytest.approx(w, abs=1e-12)


def brute_force_window_optimum(eps, w):
    u = window_values(w)
    n = eps.size
    L = n + w - 1
    best = -np.inf
    for bits in itertools.product((0, 1), repeat=L):
        num = int("".join(map(str, bits)), 2)
        s = [(num >> (L - k - w)) & ((1 << w) - 1) for k in range(n)]
        best = max(best, float(np.dot(eps, u[s])))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_viterbi_matches_exhaustive_search(seed):
    g = np.random.default_rng(seed)
    n, w = 6, 4
    eps = g.normal(size=n)
    z = track_doubling(lambda k, u: eps[k] * u, n, w)
    u = window_values(w)
    s = [(z.numerator >> (n - k)) & ((1 << w) - 1) for k in range(n)]
    assert float(np.dot(eps, u[s])) == pytest.approx(brute_force_window_optimum(eps, w), abs=1e-12)


def test_track_noise_value_is_exact_orbit_value():
    eps = np.random.default_rng(0).normal(size=300)
    z, value = track_noise(eps)
    assert z.bits == 300 + 12
    assert value == pytest.approx(float(z.doubling_orbit(300) @ eps), abs=1e-12)
    assert value / 300 > 0.2


@pytest.mark.parametrize("seed", range(10))
def test_tracker_dominates_backward_oracle(seed):
    eps = np.random.default_rng(100 + seed).normal(size=ORACLE_MAX_N)
    _, v_track = track_noise(eps)
    _, v_oracle, _ = tracking_oracle_logistic4(eps)
    assert v_track >= v_oracle - 1e-9


def test_window_bounds():
    with pytest.raises(InvalidArgumentError):
        track_doubling(lambda k, u: u, 5, w=1)
    with pytest.raises(InvalidArgumentError):
        track_doubling(lambda k, u: u, 0)
