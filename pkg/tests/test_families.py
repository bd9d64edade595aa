import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergofit.errors import DomainError, InvalidParameterError
from ergofit.families import (FIBONACCI, THUE_MORSE, Axis, DyadicAngle, SubstitutionWord, build_family,
                              fourier_observation, make_identity_vs_chaos, make_logistic, make_rotation,
                              make_substitution)


def test_thue_morse_prefix():
    assert SubstitutionWord(THUE_MORSE).prefix(8).tolist() == [0, 1, 1, 0, 1, 0, 0, 1]


def test_fibonacci_prefix():
    assert SubstitutionWord(FIBONACCI).prefix(8).tolist() == [0, 1, 0, 0, 1, 0, 1, 0]


def test_thue_morse_matches_bit_parity():
    w = SubstitutionWord(THUE_MORSE).prefix(4096)
    parity = np.array([bin(i).count("1") % 2 for i in range(4096)])
    assert np.array_equal(w, parity)


def test_fibonacci_matches_sturmian_formula():
    # 0/1 Fibonacci word: s_n = floor((n+2)/phi^2) - floor((n+1)/phi^2)
    phi2 = ((1 + math.sqrt(5)) / 2) ** 2
    ref = [int(math.floor((n + 2) / phi2) - math.floor((n + 1) / phi2)) for n in range(2000)]
    assert SubstitutionWord(FIBONACCI).prefix(2000).tolist() == ref


@pytest.mark.parametrize("rules", [{"0": "00", "1": "11"}, {"0": "0", "1": "1"}, {"0": "01"}, {"0": "", "1": "0"}])
def test_bad_substitutions_rejected(rules):
    with pytest.raises(InvalidParameterError):
        make_substitution(rules)


def test_substitution_family_shift():
    fam = make_substitution(THUE_MORSE)
    assert fam.bound_K == 1.0
    x = fam.step((0,), np.array([3]))
    assert x.tolist() == [4]
    assert fam.observe((0,), np.arange(8)).tolist() == [0, 1, 1, 0, 1, 0, 0, 1]


@pytest.mark.parametrize("lo,hi", [(-0.1, 3.0), (0.0, 4.5), (3.0, 2.0)])
def test_logistic_range_checked(lo, hi):
    with pytest.raises(InvalidParameterError):
        make_logistic(lo, hi)


@given(st.floats(0.0, 4.0), st.floats(0.0, 1.0))
def test_logistic_maps_interval_into_itself(a, x):
    fam = make_logistic()
    y = float(fam.step((a,), np.array([x]))[0])
    assert 0.0 <= y <= 1.0


@given(st.integers(1, 24).flatmap(lambda b: st.tuples(st.just(b), st.integers(0, (1 << b) - 1))),
       st.integers(1, 12))
def test_dyadic_doubling_matches_logistic4(bn, n):
    bits, num = bn
    z = DyadicAngle(num, bits)
    exact = z.doubling_orbit(n)
    x = z.x
    for k in range(n):
        assert abs(exact[k] - x) < 1e-9 * 2 ** k + 1e-12
        x = 4.0 * x * (1.0 - x)


def test_dyadic_angle_validation():
    with pytest.raises(DomainError):
        DyadicAngle(8, 3)
    z = DyadicAngle.from_bits([1, 0, 1])
    assert z.numerator == 5 and z.bits == 3
    assert z.doubled() == DyadicAngle(2, 3)


def test_axis_kinds():
    ax = Axis("alpha", kind="torus", resolution=4)
    assert ax.grid().tolist() == [0.0, 0.25, 0.5, 0.75]
    assert ax.distance(0.9, 0.1) == pytest.approx(0.2)
    fin = Axis("f", kind="finite", labels=("a", "b"))
    assert fin.grid().tolist() == [0, 1] and not fin.continuous
    with pytest.raises(InvalidParameterError):
        Axis("bad", 1.0, 0.0)


def test_rotation_family():
    fam = make_rotation(1, resolution=8)
    assert fam.params.dim == 2
    assert fam.state_grid(4).shape == (4, 1)
    x = fam.step((0.75, 0), np.array([[0.5]]))
    assert x[0, 0] == pytest.approx(0.25)
    assert float(fam.observe((0.0, 0), np.array([[0.25]]))[0]) == pytest.approx(0.0, abs=1e-15)
    assert fam.bound_K == 1.0


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_rotation_step_stays_on_torus(alpha, x):
    fam = make_rotation(1)
    y = fam.step((alpha, 0), np.array([[x]]))
    assert 0.0 <= y[0, 0] < 1.0


def test_rotation_dictionary_and_two_torus():
    fam = make_rotation(2, [fourier_observation([1, 0]), fourier_observation([0, 1], "sin", 2.0)])
    assert fam.bound_K == 2.0
    assert fam.state_grid(3).shape == (9, 2)
    v = fam.observe((0.1, 0.2, 1), np.array([[0.0, 0.125]]))
    assert float(v[0]) == pytest.approx(2.0 * math.sin(2 * math.pi * 0.125))


def test_identity_vs_chaos():
    fam = make_identity_vs_chaos()
    x = np.array([0.3])
    assert fam.step((0,), x)[0] == 0.3
    assert fam.step((1,), x)[0] == pytest.approx(4 * 0.3 * 0.7)
    assert fam.meta["chaotic_parameters"] == (1,)


def test_build_family_registry():
    assert build_family("logistic", a_lo=0.0, a_hi=3.5).params.axes[0].hi == 3.5
    assert build_family("substitution", rules="fibonacci").id == "substitution"
    assert build_family("rotation", resolution=16).params.axes[0].resolution == 16
    with pytest.raises(InvalidParameterError):
        build_family("henon")


def test_state_domain_checks():
    fam = make_logistic()
    assert fam.contains_state(0.5)
    assert not fam.contains_state(1.5)
    assert fam.contains_state(DyadicAngle(1, 2))
    with pytest.raises(DomainError):
        fam.validate_state(-0.1)


def test_grid_resolution_needs_one_entry_per_axis():
    fam = make_rotation(1, resolution=8)
    assert len(fam.params.grid((16, None))) == 16
    with pytest.raises(InvalidParameterError):
        fam.params.grid((16,))
