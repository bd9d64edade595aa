import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from ergofit.complexity import QuantizedProcess
from ergofit.distortion import (CouplingLP, DistortionBounds, bin_representatives, cost_table, cyclic_shift_costs,
                                distortion_bounds, distortion_lower_bound, distortion_upper_bound, quantize,
                                signal_noise_identity_check)
from ergofit.dynamics import advance, orbits
from ergofit.errors import DataStarvationError, InvalidArgumentError, ResourceBudgetError
from ergofit.families import make_identity_vs_chaos, make_logistic


def iid(p, k, reps=(0.0, 1.0)):
    p = np.asarray(p, float)
    d = p
    for _ in range(k - 1):
        d = np.multiply.outer(d, p)
    return QuantizedProcess((0, 1), k, d, np.array(reps))


def period2(k, reps=(0.0, 1.0)):
    y = np.tile([0.0, 1.0], 500)
    return quantize(y, [0.5], k, (0.0, 1.0))


def test_quantize_small_example():
    q = quantize(np.tile([0.0, 1.0], 50), [0.5], 2, (0.0, 1.0))
    assert np.allclose(q.block_dist, [[0, 0.5], [0.5, 0]])
    assert np.allclose(q.representatives, [0.25, 0.75])
    assert np.allclose(bin_representatives([0.0, 1.0], -1, 2), [-0.5, 0.5, 1.5])


def test_quantize_logistic_matches_arcsine_law():
    fam = make_logistic(4, 4)
    x = advance(fam, (4.0,), np.array([0.1234567]), 100)
    y = orbits(fam, (4.0,), x, 20000)[0]
    bins = np.linspace(0.1, 0.9, 9)
    q = quantize(y, bins, 1, (0.0, 1.0))
    edges = np.concatenate(([0.0], bins, [1.0]))
    cdf = 2 / np.pi * np.arcsin(np.sqrt(edges))
    assert 0.5 * np.abs(q.block_dist - np.diff(cdf)).sum() <= 0.02


def test_quantize_guards():
    with pytest.raises(DataStarvationError):
        quantize(np.zeros(30), [0.5], 2)
    with pytest.raises(InvalidArgumentError):
        quantize(np.zeros(100), [0.5, 0.2], 1)
    with pytest.raises(InvalidArgumentError):
        quantize(np.zeros(100), [0.5], 0)


def test_point_mass_vs_coin():
    P = QuantizedProcess((0, 1), 1, [1.0, 0.0], np.array([0.0, 1.0]))
    Q = iid([0.5, 0.5], 1)
    c = cost_table(P, Q)
    assert distortion_lower_bound(P, Q, c, 1) == pytest.approx(0.5)
    assert distortion_upper_bound(P, Q, c) == pytest.approx(0.5)


def test_period2_vs_coin_lp_values():
    vals = []
    for k in (1, 2, 3):
        P, Q = period2(k), iid([0.5, 0.5], k, (0.25, 0.75))
        vals.append(distortion_lower_bound(P, Q, cost_table(P, Q, "hamming"), k))
    assert vals[0] == pytest.approx(0.0, abs=1e-12)
    assert vals[1] == pytest.approx(0.25, abs=1e-12)
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    P, Q = period2(1), iid([0.5, 0.5], 1, (0.25, 0.75))
    assert distortion_upper_bound(P, Q, cost_table(P, Q, "hamming")) == pytest.approx(0.5)


@settings(max_examples=30)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 10_000))
def test_k1_is_transport_problem(a, b, seed):
    g = np.random.default_rng(seed)
    p, q = g.dirichlet(np.ones(a)), g.dirichlet(np.ones(b))
    P = QuantizedProcess(tuple(range(a)), 1, p, np.arange(a, dtype=float))
    Q = QuantizedProcess(tuple(range(b)), 1, q, np.arange(b, dtype=float))
    c = g.random((a, b))
    A = np.vstack([np.kron(np.eye(a), np.ones(b)), np.kron(np.ones(a), np.eye(b))])
    ref = linprog(c.ravel(), A_eq=A, b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs")
    assert distortion_lower_bound(P, Q, c, 1) == pytest.approx(ref.fun, abs=1e-8)


def test_monotone_in_k_and_symmetric():
    g = np.random.default_rng(3)
    y1 = g.normal(size=4000)
    y2 = np.sin(np.arange(4000) * 0.7)
    bins = [-0.5, 0.5]
    vals = []
    for k in (1, 2, 3):
        P, Q = quantize(y1, bins, k, (-2, 2)), quantize(y2, bins, k, (-2, 2))
        c = cost_table(P, Q)
        v = distortion_lower_bound(P, Q, c, k)
        assert v == pytest.approx(distortion_lower_bound(Q, P, c.T, k), abs=1e-10)
        vals.append(v)
    assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))


def test_triangle_inequality_for_hamming():
    g = np.random.default_rng(5)
    ys = [g.random(3000), np.tile([0.1, 0.9, 0.6], 1000), np.sin(np.arange(3000)) ** 2]
    qs = [quantize(y, [0.5], 1, (0, 1)) for y in ys]
    d = lambda i, j: distortion_lower_bound(qs[i], qs[j], cost_table(qs[i], qs[j], "hamming"), 1)
    assert d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12


def test_same_process_is_zero():
    P = period2(2)
    b = distortion_bounds(P, P, cost_table(P, P), 2)
    assert b.lower == pytest.approx(0, abs=1e-12) and b.upper == pytest.approx(0, abs=1e-12)


def test_phase_shift_joining_finds_alignment():
    P = quantize(np.tile([0.0, 1.0], 500), [0.5], 1, (0, 1))
    Q = quantize(np.tile([1.0, 0.0], 500), [0.5], 1, (0, 1))
    costs = cyclic_shift_costs(P, Q, cost_table(P, Q, "hamming"))
    assert costs[1] == pytest.approx(0, abs=1e-12) and costs[0] == pytest.approx(1)
    b = distortion_bounds(P, Q, cost_table(P, Q, "hamming"), 1)
    # the two phases share one stationary law, so the diagonal joining already attains 0
    assert b.upper == pytest.approx(0, abs=1e-12)
    R = quantize(np.tile([1.0, 0.0, 0.0], 400), [0.5], 1, (0, 1))
    S = quantize(np.tile([0.0, 1.0, 0.0], 400), [0.5], 1, (0, 1))
    b = distortion_bounds(R, S, cost_table(R, S, "hamming"), 1)
    assert b.upper == pytest.approx(0, abs=1e-12)


def test_lp_variable_cap():
    P = quantize(np.random.default_rng(0).random(20000), np.linspace(0.1, 0.9, 9), 2, (0, 1))
    with pytest.raises(ResourceBudgetError):
        CouplingLP(P, P, cost_table(P, P), 2, max_variables=100)


def test_bounds_sandwich_and_json():
    with pytest.raises(RuntimeError):
        DistortionBounds(1.0, 0.5, 1, "product")
    assert '"joining_used"' in DistortionBounds(0.1, 0.5, 1, "product").to_json()


def test_solution_blocks_are_a_coupling():
    P, Q = period2(2), iid([0.5, 0.5], 2, (0.25, 0.75))
    sol = CouplingLP(P, Q, cost_table(P, Q, "hamming"), 2).solve()
    assert sum(w for _, _, w in sol.blocks()) == pytest.approx(1.0)
    assert sol.to_csv().splitlines()[0] == "p_block,q_block,weight"


def test_noise_free_identity_is_exact():
    fam = make_identity_vs_chaos()
    V = np.full(2000, 0.5)
    chk = signal_noise_identity_check(fam, V, 0.0, 2000, 1, [0.25, 0.75], candidates=[((0,), 0.5), ((1,), 0.3)],
                                      value_range=(0.0, 1.0))
    assert chk.gap == pytest.approx(0.0, abs=1e-12) and chk.rhs == pytest.approx(0.0, abs=1e-12)


def _reference_block_lp(P, Q, cost):
    """Independent k=2 coupling LP over all block pairs, solved with HiGHS."""
    A, B = P.size, Q.size
    pk, qk = P.marginal(2).block_dist, Q.marginal(2).block_dist
    idx = lambda a1, a2, b1, b2: ((a1 * A + a2) * B + b1) * B + b2
    nv = A * A * B * B
    rows, rhs = [], []
    for a1 in range(A):
        for a2 in range(A):
            r = np.zeros(nv)
            for b1 in range(B):
                for b2 in range(B):
                    r[idx(a1, a2, b1, b2)] = 1
            rows.append(r), rhs.append(pk[a1, a2])
    for b1 in range(B):
        for b2 in range(B):
            r = np.zeros(nv)
            for a1 in range(A):
                for a2 in range(A):
                    r[idx(a1, a2, b1, b2)] = 1
            rows.append(r), rhs.append(qk[b1, b2])
    for a in range(A):
        for b in range(B):
            r = np.zeros(nv)
            for x in range(A):
                for y in range(B):
                    r[idx(a, x, b, y)] += 1
                    r[idx(x, a, y, b)] -= 1
            rows.append(r), rhs.append(0.0)
    c = np.array([cost[a1, b1] for a1 in range(A) for a2 in range(A) for b1 in range(B) for b2 in range(B)])
    return linprog(c, A_eq=np.array(rows), b_eq=rhs, bounds=(0, None), method="highs").fun


def test_period2_k2_lp_against_independent_solver():
    P, Q = period2(2), iid([0.5, 0.5], 2, (0.25, 0.75))
    c = cost_table(P, Q, "hamming")
    ref = _reference_block_lp(P, Q, c)
    assert ref == pytest.approx(0.25, abs=1e-9)
    assert distortion_lower_bound(P, Q, c, 2) == pytest.approx(ref, abs=1e-9)
