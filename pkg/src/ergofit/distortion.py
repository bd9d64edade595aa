"""Finite-alphabet bounds on the joining distortion between stationary processes.

Lower bounds come from an LP over shift-consistent couplings of k-block
laws; upper bounds from explicit joinings (product, diagonal, cyclic shifts
of the source sequences).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .complexity import QuantizedProcess
from .dynamics import advance, orbits
from .erm import LossSpec
from .errors import DataStarvationError, InvalidArgumentError, ResourceBudgetError
from .families import ModelFamily
from .meanwidth import NoiseModel
from .simplex import OPTIMAL, solve_lp

MAX_LP_VARIABLES = 10_000
STARVATION_FACTOR = 10


# --------------------------------------------------------------------------
# quantization


def bin_representatives(bins, lo: float, hi: float) -> np.ndarray:
    """Midpoints of the cells cut by ``bins`` inside ``[lo, hi]``."""
    bins = np.asarray(bins, dtype=float)
    edges = np.concatenate(([min(lo, bins[0])], bins, [max(hi, bins[-1])]))
    return 0.5 * (edges[:-1] + edges[1:])


def quantize(y, bins, k: int, value_range: tuple | None = None) -> QuantizedProcess:
    """Empirical k-block law of the binned sequence.

    Blocks are read cyclically (the sequence wraps around), which makes the
    law exactly shift-consistent.  Symbols are ``0..len(bins)``;
    representatives are cell midpoints with outer cells closed off at
    ``value_range`` (default: the data range).
    """
    y = np.asarray(y, dtype=float).ravel()
    bins = np.asarray(bins, dtype=float).ravel()
    k = int(k)
    if k < 1:
        raise InvalidArgumentError("block length must be >= 1")
    if bins.size == 0 or np.any(np.diff(bins) <= 0):
        raise InvalidArgumentError("cut points must be nonempty and strictly increasing")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("sequence must be finite")
    A = bins.size + 1
    need = STARVATION_FACTOR * A ** k
    if y.size < need:
        raise DataStarvationError(f"need at least {need} samples for {A} symbols at block length {k}, got {y.size}", need)
    sym = np.searchsorted(bins, y, side="right").astype(np.int64)
    idx = np.zeros(y.size, dtype=np.int64)
    for t in range(k):
        idx = idx * A + np.roll(sym, -t)
    counts = np.bincount(idx, minlength=A ** k).reshape((A,) * k)
    lo, hi = value_range if value_range is not None else (float(y.min()), float(y.max()))
    return QuantizedProcess(tuple(range(A)), k, counts / y.size, bin_representatives(bins, lo, hi), sym)


def cost_table(P: QuantizedProcess, Q: QuantizedProcess, loss: LossSpec | str = "squared") -> np.ndarray:
    """``c(a, b) = loss(rep(a), rep(b))`` or the Hamming cost on symbol labels."""
    if loss == "hamming":
        return np.array([[0.0 if a == b else 1.0 for b in Q.alphabet] for a in P.alphabet])
    if P.representatives is None or Q.representatives is None:
        raise InvalidArgumentError("real-valued costs need symbol representatives")
    loss = loss if isinstance(loss, LossSpec) else LossSpec(loss)
    return loss(P.representatives[:, None], Q.representatives[None, :])


# --------------------------------------------------------------------------
# coupling LP


@dataclass
class CouplingLP:
    """Shift-consistent couplings of the k-block laws of P and Q.

    Variables are restricted to pairs of blocks both carrying positive mass;
    any other coupling entry is forced to zero by the marginal constraints.
    """

    P: QuantizedProcess
    Q: QuantizedProcess
    cost: np.ndarray
    k: int
    max_variables: int = MAX_LP_VARIABLES
    pairs: np.ndarray = field(init=False, repr=False)
    A_eq: np.ndarray = field(init=False, repr=False)
    b_eq: np.ndarray = field(init=False, repr=False)
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        k = int(self.k)
        if k < 1 or self.P.k < k or self.Q.k < k:
            raise InvalidArgumentError("block length k must be >= 1 and at most the block length of P and Q")
        self.cost = np.asarray(self.cost, dtype=float)
        if self.cost.shape != (self.P.size, self.Q.size):
            raise InvalidArgumentError("cost table shape must be |A| x |B|")
        Pk = self.P.marginal(k).block_dist
        Qk = self.Q.marginal(k).block_dist
        sa, sb = self.P.size, self.Q.size
        pa = np.flatnonzero(Pk.ravel() > 0)
        qb = np.flatnonzero(Qk.ravel() > 0)
        nvar = pa.size * qb.size
        if nvar > self.max_variables:
            raise ResourceBudgetError(f"coupling LP has {nvar} variables, above the cap {self.max_variables}")
        ia = np.repeat(pa, qb.size)
        ib = np.tile(qb, pa.size)
        self.pairs = np.stack([ia, ib], axis=1)
        rows = []
        rhs = []
        # P marginal
        for t, a in enumerate(pa):
            row = np.zeros(nvar)
            row[t * qb.size:(t + 1) * qb.size] = 1.0
            rows.append(row)
            rhs.append(Pk.ravel()[a])
        # Q marginal
        for t, b in enumerate(qb):
            row = np.zeros(nvar)
            row[t::qb.size] = 1.0
            rows.append(row)
            rhs.append(Qk.ravel()[b])
        if k > 1:
            # shift consistency on (k-1)-block pairs: drop the head vs drop the tail
            wa, wb = sa ** (k - 1), sb ** (k - 1)
            key_tail = (ia % wa) * wb + (ib % wb)
            key_head = (ia // sa) * wb + (ib // sb)
            keys = np.union1d(key_tail, key_head)
            for key in keys:
                row = (key_tail == key).astype(float) - (key_head == key).astype(float)
                if np.any(row):
                    rows.append(row)
                    rhs.append(0.0)
        self.A_eq = np.array(rows)
        self.b_eq = np.array(rhs)
        first_a = ia // (sa ** (k - 1))
        first_b = ib // (sb ** (k - 1))
        self.c = self.cost[first_a, first_b]

    @property
    def n_variables(self) -> int:
        return self.pairs.shape[0]

    def solve(self):
        res = solve_lp(self.c, self.A_eq, self.b_eq)
        if res.status != OPTIMAL:
            raise RuntimeError("coupling LP is unbounded, which cannot happen for a valid instance")
        return CouplingSolution(self, res.x, res.value, res.iterations)


@dataclass
class CouplingSolution:
    lp: CouplingLP
    weights: np.ndarray
    value: float
    iterations: int

    def blocks(self):
        k, P, Q = self.lp.k, self.lp.P, self.lp.Q
        for (a, b), w in zip(self.lp.pairs, self.weights):
            if w > 0:
                yield _unravel(a, P.size, k), _unravel(b, Q.size, k), float(w)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p_block", "q_block", "weight"])
        for a, b, wt in self.blocks():
            w.writerow([" ".join(map(str, a)), " ".join(map(str, b)), repr(wt)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _unravel(flat, size, k):
    return tuple(int(v) for v in np.unravel_index(int(flat), (size,) * k))


def distortion_lower_bound(P: QuantizedProcess, Q: QuantizedProcess, cost, k: int,
                           max_variables: int = MAX_LP_VARIABLES) -> float:
    """Optimum of the k-block coupling LP (a lower bound on the joining distortion)."""
    return CouplingLP(P, Q, cost, k, max_variables).solve().value


def _same_process(P: QuantizedProcess, Q: QuantizedProcess) -> bool:
    if P.alphabet != Q.alphabet:
        return False
    k = min(P.k, Q.k)
    return bool(np.allclose(P.marginal(k).block_dist, Q.marginal(k).block_dist, atol=1e-12, rtol=0))


def cyclic_shift_costs(P: QuantizedProcess, Q: QuantizedProcess, cost) -> np.ndarray:
    """Expected cost of the joining ``(P_t, Q_{t+s})`` of the source cycles, for every shift s."""
    if P.symbols is None or Q.symbols is None:
        raise InvalidArgumentError("cyclic-shift joinings need the source symbol sequences")
    if P.symbols.size != Q.symbols.size:
        raise InvalidArgumentError("cyclic-shift joinings need source cycles of equal length")
    N = P.symbols.size
    cost = np.asarray(cost, dtype=float)
    total = np.zeros(N)
    fq = {b: np.fft.rfft(Q.symbols == b) for b in range(Q.size) if np.any(Q.symbols == b)}
    for a in range(P.size):
        ind = P.symbols == a
        if not ind.any():
            continue
        fa = np.conj(np.fft.rfft(ind))
        for b, fb in fq.items():
            if cost[a, b] != 0.0:
                total += cost[a, b] * np.fft.irfft(fa * fb, N)
    return np.maximum(total / N, 0.0)


def distortion_upper_bound(P: QuantizedProcess, Q: QuantizedProcess, cost, strategy: str = "product") -> float:
    """Expected first-coordinate cost of an explicit joining."""
    cost = np.asarray(cost, dtype=float)
    p1 = P.marginal(1).block_dist
    q1 = Q.marginal(1).block_dist
    if strategy == "product":
        return float(p1 @ cost @ q1)
    if strategy == "diagonal":
        if not _same_process(P, Q):
            raise InvalidArgumentError("the diagonal joining needs identical processes")
        return float(p1 @ np.diag(cost))
    if strategy == "best-cyclic-shift":
        return float(cyclic_shift_costs(P, Q, cost).min())
    raise InvalidArgumentError(f"unknown joining strategy {strategy!r}")


@dataclass(frozen=True)
class DistortionBounds:
    lower: float
    upper: float
    k: int
    joining_used: str

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise RuntimeError(f"distortion sandwich violated: lower {self.lower} > upper {self.upper}")

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "k": self.k, "joining_used": self.joining_used}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def distortion_bounds(P: QuantizedProcess, Q: QuantizedProcess, cost, k: int,
                      max_variables: int = MAX_LP_VARIABLES) -> DistortionBounds:
    """LP lower bound with the best applicable explicit-joining upper bound."""
    lower = distortion_lower_bound(P, Q, cost, k, max_variables)
    best, used = distortion_upper_bound(P, Q, cost, "product"), "product"
    if _same_process(P, Q):
        v = distortion_upper_bound(P, Q, cost, "diagonal")
        if v < best:
            best, used = v, "diagonal"
    if P.symbols is not None and Q.symbols is not None and P.symbols.size == Q.symbols.size:
        v = distortion_upper_bound(P, Q, cost, "best-cyclic-shift")
        if v < best:
            best, used = v, "phase-aligned shift"
    return DistortionBounds(lower, best, int(k), used)


# --------------------------------------------------------------------------
# signal plus noise identity


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    gap: float
    best_lhs: tuple
    best_rhs: tuple


def _process_sample(family: ModelFamily, theta, x0, n: int, burn_in: int) -> np.ndarray:
    x = np.asarray(x0)
    if family.state_domain == "torus":
        x = x.reshape(1, -1)
    else:
        x = x.reshape(1)
    x = advance(family, theta, x, burn_in)
    return orbits(family, theta, x, n)[0]


def signal_noise_identity_check(family: ModelFamily, signal: np.ndarray, sigma: float, n: int, k: int, bins,
                                seed: int = 0, candidates=None, burn_in: int = 1000,
                                value_range: tuple | None = None,
                                max_variables: int = MAX_LP_VARIABLES) -> IdentityCheck:
    """Probe ``min gamma_2(U, V + eps) = min gamma_2(U, V) + sigma^2`` on quantized processes.

    ``candidates`` lists ``(theta, x0)`` pairs whose long orbits stand in for
    the family's processes (default: every theta-grid point with x0 from the
    state grid's first point).  Both sides use the same bins and the
    squared cost on cell midpoints.
    """
    V = np.asarray(signal, dtype=float)[:n]
    if V.size < n:
        raise InvalidArgumentError("signal shorter than n")
    sigma = float(sigma)
    eps = NoiseModel("gaussian", sigma).sample(seeding.stream(seed, "identity_noise"), n) if sigma > 0 else np.zeros(n)
    Y = V + eps
    if candidates is None:
        x0 = family.state_grid(2)[0]
        candidates = [(th, x0) for th in family.params.grid()]
    bins = np.asarray(bins, dtype=float)
    if value_range is None:
        value_range = (float(min(Y.min(), V.min(), -family.bound_K)), float(max(Y.max(), V.max(), family.bound_K)))
    qY = quantize(Y, bins, k, value_range)
    qV = quantize(V, bins, k, value_range)
    best_l = (math.inf, None)
    best_r = (math.inf, None)
    for th, x0 in candidates:
        U = _process_sample(family, th, x0, n, burn_in)
        qU = quantize(U, bins, k, value_range)
        c = cost_table(qU, qY, "squared")
        gl = distortion_lower_bound(qU, qY, c, k, max_variables)
        gr = distortion_lower_bound(qU, qV, c, k, max_variables)
        if gl < best_l[0]:
            best_l = (gl, (th, x0))
        if gr < best_r[0]:
            best_r = (gr, (th, x0))
    lhs = best_l[0]
    rhs = best_r[0] + sigma ** 2
    return IdentityCheck(lhs, rhs, abs(lhs - rhs), best_l[1], best_r[1])


__all__ = [
    "CouplingLP", "CouplingSolution", "DistortionBounds", "IdentityCheck", "bin_representatives", "cost_table",
    "cyclic_shift_costs", "distortion_bounds", "distortion_lower_bound", "distortion_upper_bound", "quantize",
    "signal_noise_identity_check",
]
