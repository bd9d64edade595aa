import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ergofit.dynamics import MAX_HORIZON, SequenceSample, orbit, orbits, pseudo_metric, sample_sequences
from ergofit.errors import DomainError, InvalidArgumentError
from ergofit.families import DyadicAngle, make_logistic, make_rotation, make_substitution, THUE_MORSE


def test_logistic_orbit_matches_loop():
    fam = make_logistic()
    u = orbit(fam, (3.2,), 0.5, 50)
    x, ref = 0.5, []
    for _ in range(50):
        ref.append(x)
        x = 3.2 * (x * (1.0 - x))
    assert np.array_equal(u, np.array(ref))


def test_rotation_orbit_is_cosine_of_angle():
    fam = make_rotation(1)
    u = orbit(fam, (0.125, 0), np.array([0.0]), 16)
    ref = np.cos(2 * np.pi * (np.arange(16) * 0.125 % 1.0))
    assert np.allclose(u, ref, atol=1e-12)


def test_substitution_orbit_reads_the_word():
    fam = make_substitution(THUE_MORSE)
    assert orbit(fam, (0,), 3, 5).tolist() == [0, 1, 0, 0, 1]


def test_exact_orbit_for_dyadic_state():
    fam = make_logistic(4, 4)
    z = DyadicAngle(0b1011, 4)
    assert np.array_equal(orbit(fam, (4.0,), z, 6), z.doubling_orbit(6))


def test_orbit_validation():
    fam = make_logistic(0, 3.5)
    with pytest.raises(DomainError):
        orbit(fam, (3.9,), 0.5, 4)
    with pytest.raises(DomainError):
        orbit(fam, (3.0,), 1.5, 4)
    with pytest.raises(InvalidArgumentError):
        orbit(fam, (3.0,), 0.5, 0)
    with pytest.raises(InvalidArgumentError):
        orbit(fam, (3.0,), 0.5, MAX_HORIZON + 1)


def test_vectorized_orbits_agree_with_single():
    fam = make_logistic()
    xs = np.linspace(0, 1, 7)
    O = orbits(fam, (3.7,), xs, 20)
    for i, x in enumerate(xs):
        assert np.array_equal(O[i], orbit(fam, (3.7,), x, 20))


def test_sample_order_theta_outer():
    fam = make_logistic(3.0, 4.0, resolution=3)
    s = sample_sequences(fam, fam.params.grid(), np.array([0.2, 0.4]), 5)
    assert len(s) == 6 and s.n == 5
    assert [t[0] for t in s.thetas] == [3.0, 3.0, 3.5, 3.5, 4.0, 4.0]
    assert np.array_equal(s.values[3], orbit(fam, (3.5,), 0.4, 5))
    assert s.prefix(2).values.shape == (6, 2)
    with pytest.raises(InvalidArgumentError):
        s.prefix(6)


def test_sample_from_values():
    s = SequenceSample.from_values([[0, 1], [1, 1]])
    assert len(s) == 2 and s.n == 2


vec = st.integers(1, 12).flatmap(lambda n: st.tuples(*[arrays(np.float64, n, elements=st.floats(-5, 5))] * 3))


@given(vec, st.sampled_from([1.0, 1.5, 2.0, 3.0, np.inf]))
def test_pseudo_metric_axioms(uvw, p):
    u, v, w = uvw
    d = lambda a, b: pseudo_metric(a, b, p)
    assert d(u, u) == 0.0
    assert d(u, v) == pytest.approx(d(v, u), abs=1e-12)
    assert d(u, w) <= d(u, v) + d(v, w) + 1e-9


@given(vec)
def test_pseudo_metric_monotone_in_p(uvw):
    u, v, _ = uvw
    vals = [pseudo_metric(u, v, p) for p in (1, 2, 4, np.inf)]
    assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


def test_pseudo_metric_values():
    u = np.zeros(4)
    v = np.array([1.0, 0, 0, 0])
    assert pseudo_metric(u, v, 1) == 0.25
    assert pseudo_metric(u, v, 2) == pytest.approx(0.5)
    assert pseudo_metric(u, v, np.inf) == 1.0
    with pytest.raises(InvalidArgumentError):
        pseudo_metric(u, v, 0.5)
    with pytest.raises(InvalidArgumentError):
        pseudo_metric(u, v[:3], 2)
