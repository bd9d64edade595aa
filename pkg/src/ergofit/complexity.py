"""Covering and packing numbers of sequence samples, entropy-rate slopes,
block entropy of quantized processes and the packing-lemma bound."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _cover_kernel as ck
from .dynamics import SequenceSample, pseudo_metric, sample_sequences
from .errors import InvalidArgumentError, PreconditionError, ResourceBudgetError
from .families import ModelFamily

DEFAULT_MAX_CELLS = 2 * 10**8
DEFAULT_MAX_VARIANTS = 4096


def normalize_p(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity", "max"):
            return math.inf
        p = float(p)
    p = float(p)
    if not p >= 1.0:
        raise InvalidArgumentError(f"norm index p={p} must be >= 1")
    return p


def _values(sample) -> np.ndarray:
    U = sample.values if isinstance(sample, SequenceSample) else np.asarray(sample, dtype=float)
    U = np.atleast_2d(U)
    if U.ndim != 2 or U.shape[0] == 0 or U.shape[1] == 0:
        raise InvalidArgumentError("sample must contain at least one nonempty sequence")
    return np.ascontiguousarray(U, dtype=np.float64)


def _thresholds(U: np.ndarray) -> np.ndarray:
    # midrange split per coordinate; constant columns never flip
    m = min(U.shape[1], ck.KEY_BITS)
    lo = U[:, :m].min(axis=0)
    hi = U[:, :m].max(axis=0)
    thr = 0.5 * (lo + hi)
    thr[lo == hi] = np.inf
    return thr


def _check_radius(r) -> float:
    r = float(r)
    if not r > 0 or not np.isfinite(r):
        raise InvalidArgumentError(f"radius r={r} must be positive and finite")
    return r


def greedy_packing(sample, r: float, p=math.inf, max_variants: int = DEFAULT_MAX_VARIANTS):
    """Maximal r-separated subset from one greedy pass in sample order.

    A row joins the packing when its distance to every earlier member exceeds
    ``r``; the members therefore also form an r-cover of the sample.

    Returns ``(M, indices)``.
    """
    U = _values(sample)
    r = _check_radius(r)
    p = normalize_p(p)
    centers, _ = ck.greedy_centers(U, r, p, _thresholds(U), int(max_variants))
    return int(centers.size), centers


def cover_count(sample, r: float, p=math.inf, max_variants: int = DEFAULT_MAX_VARIANTS,
                return_centers: bool = False):
    """Size of the greedy r-cover with centers taken from the sample.

    Centers are picked in sample order whenever a row is farther than ``r``
    from every center so far, which is the greedy packing pass itself.  Any
    r-cover has at least M(2r) centers, so ``M(2r) <= N(r) <= M(r)``.
    Reverse-delete pruning cannot shrink this cover: every center is the
    only one within ``r`` of itself.
    """
    M, centers = greedy_packing(sample, r, p, max_variants)
    return (M, centers) if return_centers else M


def _counts(U, r, p, max_variants):
    centers, _ = ck.greedy_centers(U, r, p, _thresholds(U), max_variants)
    return int(centers.size), int(centers.size)


def fit_slope(horizons, counts) -> float:
    """Least-squares slope of log count vs n over the top half of the horizons."""
    h = np.asarray(horizons, dtype=float)
    c = np.asarray(counts, dtype=float)
    if h.size < 2:
        return float("nan")
    top = max(2, (h.size + 1) // 2)
    h, c = h[-top:], np.log(c[-top:])
    return float(np.polyfit(h, c, 1)[0])


@dataclass
class ComplexityReport:
    p: float
    radii: list
    horizons: list
    packing_counts: np.ndarray
    cover_counts: np.ndarray
    slopes: list
    family_id: str = ""
    sample_size: int = 0
    meta: dict = field(default_factory=dict)

    def N(self, n: int, r: float) -> int:
        return int(self.cover_counts[self.horizons.index(n), self._r_index(r)])

    def M(self, n: int, r: float) -> int:
        return int(self.packing_counts[self.horizons.index(n), self._r_index(r)])

    def _r_index(self, r):
        for j, rr in enumerate(self.radii):
            if math.isclose(rr, r, rel_tol=1e-12):
                return j
        raise InvalidArgumentError(f"radius {r} not in the report")

    def slope(self, r: float) -> float:
        return self.slopes[self._r_index(r)]

    def rows(self):
        for i, n in enumerate(self.horizons):
            for j, r in enumerate(self.radii):
                yield {"p": _p_label(self.p), "n": n, "r": r,
                       "N": int(self.cover_counts[i, j]), "M": int(self.packing_counts[i, j]),
                       "slope": self.slopes[j]}

    def to_csv(self, path=None, with_slope: bool = False) -> str:
        cols = ["p", "n", "r", "N", "M"] + (["slope"] if with_slope else [])
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "family_id": self.family_id,
            "p": _p_label(self.p),
            "radii": list(self.radii),
            "horizons": list(self.horizons),
            "sample_size": self.sample_size,
            "cover_counts": self.cover_counts.tolist(),
            "packing_counts": self.packing_counts.tolist(),
            "slopes": [None if not np.isfinite(s) else s for s in self.slopes],
            "meta": self.meta,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _p_label(p):
    return "inf" if math.isinf(p) else p


def entropy_profile(family: ModelFamily | None, theta_grid, x_grid, radii, horizons, p=math.inf, *,
                    sample: SequenceSample | None = None, max_cells: int = DEFAULT_MAX_CELLS,
                    max_variants: int = DEFAULT_MAX_VARIANTS) -> ComplexityReport:
    """Cover/packing tables over (n, r) and per-radius entropy slopes.

    Orbits are generated once at the largest horizon and truncated.  Passing
    a precomputed ``sample`` skips generation (family may then be None).
    """
    horizons = [int(n) for n in horizons]
    radii = [_check_radius(r) for r in radii]
    p = normalize_p(p)
    if not horizons or not radii:
        raise InvalidArgumentError("need at least one horizon and one radius")
    if any(b <= a for a, b in zip(horizons, horizons[1:])) or horizons[0] < 1:
        raise InvalidArgumentError("horizons must be positive and strictly increasing")
    nmax = horizons[-1]
    if sample is None:
        size = len(list(theta_grid)) * int(np.asarray(x_grid).shape[0])
        if size * nmax > max_cells:
            raise ResourceBudgetError(f"sample of {size} sequences at n={nmax} exceeds the budget of {max_cells} cells")
        sample = sample_sequences(family, theta_grid, x_grid, nmax)
    else:
        if sample.n < nmax:
            raise InvalidArgumentError("precomputed sample is shorter than the largest horizon")
        if len(sample) * nmax > max_cells:
            raise ResourceBudgetError(f"sample of {len(sample)} sequences at n={nmax} exceeds the budget of {max_cells} cells")
    N = np.zeros((len(horizons), len(radii)), dtype=np.int64)
    M = np.zeros_like(N)
    for i, n in enumerate(horizons):
        U = np.ascontiguousarray(sample.values[:, :n], dtype=np.float64)
        for j, r in enumerate(radii):
            N[i, j], M[i, j] = _counts(U, r, p, int(max_variants))
        del U
    slopes = [fit_slope(horizons, N[:, j]) for j in range(len(radii))]
    return ComplexityReport(p, radii, horizons, M, N, slopes,
                            family_id=sample.family_id, sample_size=len(sample))


# --------------------------------------------------------------------------
# quantized processes


@dataclass
class QuantizedProcess:
    """Stationary k-block law over a finite alphabet.

    ``block_dist`` has shape ``(|A|,) * k``.  ``representatives`` holds one
    real value per symbol (bin midpoints) for building cost tables; ``symbols``
    optionally keeps the source symbol sequence.
    """

    alphabet: tuple
    k: int
    block_dist: np.ndarray
    representatives: np.ndarray | None = None
    symbols: np.ndarray | None = None

    def __post_init__(self):
        self.alphabet = tuple(self.alphabet)
        self.block_dist = np.asarray(self.block_dist, dtype=float)
        A = len(self.alphabet)
        if self.k < 1 or A < 1:
            raise InvalidArgumentError("block length and alphabet size must be positive")
        if self.block_dist.shape != (A,) * self.k:
            raise InvalidArgumentError(f"block_dist must have shape {(A,) * self.k}")
        if np.any(self.block_dist < 0):
            raise InvalidArgumentError("block probabilities must be nonnegative")
        if abs(self.block_dist.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("block probabilities must sum to 1")
        if self.k > 1:
            left = self.block_dist.sum(axis=-1)
            right = self.block_dist.sum(axis=0)
            if np.max(np.abs(left - right)) > 1e-10:
                raise InvalidArgumentError("block law is not shift-consistent")
        if self.representatives is not None:
            self.representatives = np.asarray(self.representatives, dtype=float)
            if self.representatives.shape != (A,):
                raise InvalidArgumentError("need one representative value per symbol")

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def marginal(self, j: int) -> "QuantizedProcess":
        """Law of the first ``j`` coordinates."""
        if not 1 <= j <= self.k:
            raise InvalidArgumentError(f"marginal length {j} outside [1, {self.k}]")
        dist = self.block_dist.sum(axis=tuple(range(j, self.k))) if j < self.k else self.block_dist
        return QuantizedProcess(self.alphabet, j, dist, self.representatives, self.symbols)

    def probability(self, block) -> float:
        index = {s: i for i, s in enumerate(self.alphabet)}
        return float(self.block_dist[tuple(index[s] for s in block)])

    @classmethod
    def iid(cls, probs, alphabet=None, k: int = 1, representatives=None) -> "QuantizedProcess":
        probs = np.asarray(probs, dtype=float)
        alphabet = tuple(range(probs.size)) if alphabet is None else tuple(alphabet)
        dist = probs
        for _ in range(k - 1):
            dist = np.multiply.outer(dist, probs)
        return cls(alphabet, k, dist, representatives)

    @classmethod
    def from_blocks(cls, alphabet, k: int, blocks: dict, representatives=None) -> "QuantizedProcess":
        index = {s: i for i, s in enumerate(alphabet)}
        dist = np.zeros((len(alphabet),) * k)
        for block, prob in blocks.items():
            dist[tuple(index[s] for s in block)] += prob
        return cls(tuple(alphabet), k, dist, representatives)

    @classmethod
    def periodic(cls, word, alphabet=None, k: int = 1, representatives=None) -> "QuantizedProcess":
        """Random-phase law of a periodic symbol sequence."""
        word = list(word)
        alphabet = tuple(sorted(set(word))) if alphabet is None else tuple(alphabet)
        L = len(word)
        blocks: dict = {}
        for s in range(L):
            b = tuple(word[(s + t) % L] for t in range(k))
            blocks[b] = blocks.get(b, 0.0) + 1.0 / L
        q = cls.from_blocks(alphabet, k, blocks, representatives)
        index = {s: i for i, s in enumerate(alphabet)}
        q.symbols = np.array([index[s] for s in word], dtype=np.int64)
        return q


def block_entropy(q: QuantizedProcess) -> float:
    """``H_k / k`` in nats per symbol."""
    pr = q.block_dist.ravel()
    pr = pr[pr > 0]
    return float(-(pr * np.log(pr)).sum() / q.k)


# --------------------------------------------------------------------------
# packing lemma


def binary_entropy2(a: float) -> float:
    if a <= 0.0 or a >= 1.0:
        return 0.0
    return -(a * math.log2(a) + (1 - a) * math.log2(1 - a))


def packing_bound(n: int, delta: float, K: float) -> float:
    """``(3K/delta)^{delta n / 2} * 2^{H2(delta/2) n}``."""
    log_b = 0.5 * delta * n * math.log(3.0 * K / delta) + binary_entropy2(delta / 2.0) * n * math.log(2.0)
    return math.exp(log_b) if log_b < 700 else math.inf


def probe_radius(delta: float, p: float) -> float:
    return (delta / 2.0) ** ((1.0 + p) / p)


@dataclass(frozen=True)
class PackingCheck:
    M: int
    bound: float
    passed: bool
    epsilon: float


def packing_bound_check(u, delta: float, p: float, K: float, probes) -> PackingCheck:
    """Greedy delta-packing in d_{n,inf} among probes near ``u`` against the lemma bound.

    Probes must lie within d_{n,p} distance ``(delta/2)^{(1+p)/p}`` of ``u``;
    separation means distance at least ``delta``.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise InvalidArgumentError("u must be a nonempty 1-d sequence")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("delta must lie in (0, 1)")
    p = normalize_p(p)
    if math.isinf(p):
        raise InvalidArgumentError("the packing lemma needs a finite p")
    K = float(K)
    if K < 1.0:
        raise InvalidArgumentError("K must be >= 1")
    V = _values(probes)
    if V.shape[1] != u.size:
        raise InvalidArgumentError("probe length differs from u")
    if np.any(np.abs(u) > K) or np.any(np.abs(V) > K):
        raise PreconditionError(f"values must lie in [-{K}, {K}]")
    eps = probe_radius(delta, p)
    for row in V:
        if pseudo_metric(row, u, p) > eps * (1.0 + 1e-12):
            raise PreconditionError(f"probe lies outside the d_(n,p) ball of radius {eps:g} around u")
    M, _ = greedy_packing(V, np.nextafter(delta, 0.0), math.inf)
    B = packing_bound(u.size, delta, K)
    return PackingCheck(M, B, M <= B, eps)


def random_probe_set(u, delta: float, p: float, K: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Random probes inside the d_{n,p} ball of radius ``(delta/2)^{(1+p)/p}`` around ``u``.

    Deviations are sparse spikes (random support, values up to 2K) clipped to
    [-K, K] and shrunk toward ``u`` when they leave the ball, so a few
    coordinates can move far enough to produce delta-separated probes.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    p = normalize_p(p)
    eps = probe_radius(delta, p)
    q = rng.uniform(0.0, 1.0, size=(size, 1))
    mask = rng.uniform(0.0, 1.0, size=(size, n)) < q
    D = np.where(mask, rng.uniform(-2.0 * K, 2.0 * K, size=(size, n)), 0.0)
    V = np.clip(u[None, :] + D, -K, K)
    D = V - u[None, :]
    dist = np.mean(np.abs(D) ** p, axis=1) ** (1.0 / p)
    shrink = np.where(dist > eps, eps / np.maximum(dist, 1e-300) * (1.0 - 1e-9), 1.0)
    return u[None, :] + D * shrink[:, None]


__all__ = [
    "ComplexityReport", "QuantizedProcess", "PackingCheck", "random_probe_set", "block_entropy", "cover_count",
    "entropy_profile", "fit_slope", "greedy_packing", "packing_bound", "packing_bound_check",
    "probe_radius", "binary_entropy2", "normalize_p",
]
