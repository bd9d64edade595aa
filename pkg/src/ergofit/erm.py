"""Losses, empirical risk, approximate minimum-risk fitting and the noise-smoothed loss."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from . import seeding
from .dynamics import advance, orbit, orbits
from .errors import InvalidArgumentError
from .families import DyadicAngle, ModelFamily, build_family
from .meanwidth import NoiseModel, OptimizerConfig, _chaotic_thetas, iter_grid_blocks, refine_lockstep, state_points
from .tracking import track_doubling

SQUARED = "squared"
ABSOLUTE = "absolute"
BREGMAN = "bregman"
KURTOSIS_WARN = 100.0


@dataclass(frozen=True)
class LossSpec:
    """Loss ``l(u, v)`` between a model output u and an observation v.

    ``bregman`` uses ``F(v) - F(u) - (v - u) F'(u)`` for the polynomial
    potential F with ascending coefficients ``coeffs``; squared loss is the
    case ``F(x) = x^2``.  ``offset`` adds a constant, which breaks
    ``l(u, u) = 0`` and exists only to probe argmin invariance.
    """

    kind: str = SQUARED
    coeffs: tuple = ()
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in (SQUARED, ABSOLUTE, BREGMAN):
            raise InvalidArgumentError(f"unknown loss kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.kind == BREGMAN and len(self.coeffs) < 3:
            raise InvalidArgumentError("a Bregman potential needs degree >= 2")
        if not math.isfinite(self.offset) or self.offset < 0:
            raise InvalidArgumentError("loss offset must be finite and nonnegative")

    def __call__(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == SQUARED:
            out = (u - v) ** 2
        elif self.kind == ABSOLUTE:
            out = np.abs(u - v)
        else:
            c = np.array(self.coeffs)
            out = P.polyval(v, c) - P.polyval(u, c) - (v - u) * P.polyval(u, P.polyder(c))
            out = np.maximum(out, 0.0)
        return out + self.offset if self.offset else out

    def check_convex(self, lo: float, hi: float) -> bool:
        """F'' >= 0 on [lo, hi] (checked at endpoints and interior critical points)."""
        if self.kind != BREGMAN:
            return True
        d2 = P.polyder(np.array(self.coeffs), 2)
        pts = [lo, hi]
        d3 = P.polyder(d2)
        if d3.size and np.any(d3 != 0):
            for r in P.polyroots(d3) if d3.size > 1 else []:
                if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                    pts.append(r.real)
        return bool(min(P.polyval(np.array(pts), d2)) >= -1e-12)

    def validate_for(self, bound_K: float, sigma: float = 0.0):
        lo, hi = -bound_K - 10 * sigma, bound_K + 10 * sigma
        if not self.check_convex(lo, hi):
            raise InvalidArgumentError(f"Bregman potential is not convex on [{lo}, {hi}]")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.coeffs:
            d["coeffs"] = list(self.coeffs)
        if self.offset:
            d["offset"] = self.offset
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "LossSpec":
        d = dict(d or {})
        return cls(d.get("kind", SQUARED), tuple(d.get("coeffs", ())), float(d.get("offset", 0.0)))


# --------------------------------------------------------------------------
# observed data


@dataclass
class ObservedSeries:
    """Observations ``Y_0..Y_{n-1}`` with optional generating recipe."""

    y: np.ndarray
    provenance: dict | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 1 or self.y.size == 0:
            raise InvalidArgumentError("observed series must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(self.y)):
            raise InvalidArgumentError("observed series must be finite")

    def __len__(self):
        return self.y.size

    def prefix(self, n: int) -> "ObservedSeries":
        return ObservedSeries(self.y[:n], self.provenance)

    def regenerate(self) -> "ObservedSeries":
        if self.provenance is None:
            raise InvalidArgumentError("series has no provenance to regenerate from")
        return signal_plus_noise(**self.provenance)


def _signal(signal: dict, n: int, seed: int, key: str = "") -> np.ndarray:
    kind = signal.get("kind", "orbit")
    if kind == "constant":
        return np.full(n, float(signal["value"]))
    if kind != "orbit":
        raise InvalidArgumentError(f"unknown signal kind {kind!r}")
    fam = build_family(signal["family"], **signal.get("family_args", {}))
    theta = tuple(signal["theta"])
    fam.params.validate(theta)
    x0 = signal.get("x0")
    if x0 is None:
        x0 = fam.sample_states(seeding.stream(seed, key + "/signal_state"), 1)[0]
    x0 = np.asarray(x0, dtype=float if fam.state_domain != "symbolic" else np.int64)
    x = advance(fam, theta, x0.reshape((1, -1) if fam.state_domain == "torus" else (1,)), signal.get("burn_in", 1000))
    return orbits(fam, theta, x, n)[0]


def signal_plus_noise(signal: dict, noise: dict, n: int, seed: int, key: str = "") -> ObservedSeries:
    """``Y = V + eps`` with V from ``signal`` and i.i.d. noise, both keyed by ``seed``.

    signal: ``{"kind": "constant", "value": c}`` or ``{"kind": "orbit", "family": id,
    "family_args": {...}, "theta": [...], "x0": value or None, "burn_in": B}``.
    ``key`` namespaces the random streams (e.g. an experiment name).
    """
    n = int(n)
    V = _signal(signal, n, seed, key)
    nm = NoiseModel.from_dict(noise)
    eps = nm.sample(seeding.stream(seed, key + "/noise"), n)
    prov = {"signal": signal, "noise": nm.to_dict(), "n": n, "seed": int(seed), "key": key}
    return ObservedSeries(V + eps, prov)


def signal_of(series: ObservedSeries) -> np.ndarray:
    """The noiseless signal V behind a series with provenance."""
    p = series.provenance
    if p is None:
        raise InvalidArgumentError("series has no provenance")
    return _signal(p["signal"], p["n"], p["seed"], p.get("key", ""))


# --------------------------------------------------------------------------
# risk and fitting


def _y(y) -> np.ndarray:
    arr = y.y if isinstance(y, ObservedSeries) else np.asarray(y, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError("observations must be a nonempty 1-d sequence")
    return arr


def empirical_risk(family: ModelFamily, theta, x, y, loss: LossSpec) -> float:
    """``n^-1 sum_k l(f(T^k x), Y_k)``."""
    yy = _y(y)
    u = orbit(family, theta, x, yy.size)
    return float(np.mean(loss(u, yy)))


@dataclass
class FitResult:
    theta: tuple
    x: object
    risk: float
    trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    partial: bool = False

    def state_repr(self, x=None):
        x = self.x if x is None else x
        if isinstance(x, DyadicAngle):
            return {"dyadic_numerator": str(x.numerator), "bits": x.bits, "x": x.x}
        arr = np.asarray(x)
        return arr.tolist()

    def to_dict(self) -> dict:
        return {
            "theta": list(self.theta),
            "x": self.state_repr(),
            "risk": self.risk,
            "partial": self.partial,
            "diagnostics": self.diagnostics,
            "trace": [{"n": t["n"], "theta": list(t["theta"]), "risk": t["risk"], "running_min": t["running_min"]}
                      for t in self.trace],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def trace_csv(self, path=None, names=None) -> str:
        dim = len(self.theta)
        names = list(names) if names else [f"theta{j}" for j in range(dim)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n"] + [f"{nm}_hat" for nm in names] + ["risk"])
        for t in self.trace:
            w.writerow([t["n"], *t["theta"], t["risk"]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _key(theta, x):
    xv = x.x if isinstance(x, DyadicAngle) else np.asarray(x, dtype=float).ravel().tolist()
    return (tuple(theta), xv)


def _better(r1, th1, x1, r2, th2, x2) -> bool:
    """Candidate 1 beats candidate 2: lower risk, then lexicographic (theta, x)."""
    if r1 != r2:
        return r1 < r2
    return _key(th1, x1) < _key(th2, x2)


def _grid_search(family, yy, loss, cfg, horizons, thetas=None):
    """Best grid cell per horizon using cumulative loss sums."""
    if thetas is None:
        thetas = family.params.grid(cfg.theta_resolution)
    nmax = horizons[-1]
    xgrid = state_points(family, nmax, cfg)
    m = xgrid.shape[0]
    H = len(horizons)
    best = np.full(H, np.inf)
    best_flat = np.full(H, -1, dtype=np.int64)
    hidx = np.asarray(horizons) - 1
    evals = 0
    limit = cfg.max_evaluations
    partial = limit is not None and len(thetas) * m > limit
    for start, th, X, O in iter_grid_blocks(family, thetas, xgrid, nmax, cfg.chunk_rows, limit):
        L = loss(O, yy[None, :nmax])
        C = np.cumsum(L, axis=1)[:, hidx] / np.asarray(horizons, dtype=float)
        evals += O.shape[0]
        idx = np.argmin(C, axis=0)
        val = C[idx, np.arange(H)]
        upd = val < best
        best = np.where(upd, val, best)
        best_flat = np.where(upd, start + idx, best_flat)
    cands = [(thetas[f // m], xgrid[f % m]) for f in best_flat]
    return cands, evals, partial, (len(thetas), m)


def _fit_prefix(family, yy, loss, cfg, start, seed, rng_starts, allowed=None):
    """Refine a grid start, add tracking and random candidates; return best (theta, x, risk, diag)."""
    n = yy.size
    theta0, x0 = start
    risk0 = empirical_risk(family, theta0, x0, yy, loss)
    cands = [(risk0, theta0, x0)]
    diag = {"refine_evaluations": 0, "tracking_candidates": 0, "random_starts": 0}

    def objective(th, X):
        return np.mean(loss(orbits(family, th, X, n), yy[None, :]), axis=1)

    starts = [(theta0, x0)]
    if rng_starts:
        rng = seeding.stream(seed, "fit_random_starts", n)
        TH = [tuple(_random_axis_value(a, rng) for a in family.params.axes) for _ in range(rng_starts)]
        XS = family.sample_states(rng, rng_starts)
        for th, xs in zip(TH, XS):
            r = empirical_risk(family, th, xs, yy, loss)
            cands.append((r, th, xs))
            starts.append((th, xs))
        diag["random_starts"] = rng_starts

    if cfg.kind in ("grid+refine", "tracking") and cfg.refine_rounds > 0:
        res = cfg.theta_resolution
        spacing_t = [a.spacing(None if res is None else res[j]) for j, a in enumerate(family.params.axes)]
        m = state_points(family, n, cfg).shape[0]
        spacing_x = 1.0 / max(m - 1, 1)
        vals = np.array([c[0] for c in cands])
        t2, x2, v2, ev = refine_lockstep(family, [s[0] for s in starts], np.array([s[1] for s in starts]),
                                         vals, objective, spacing_t, spacing_x, cfg.refine_rounds,
                                         cfg.golden_iters, cfg.tol, maximize=False)
        diag["refine_evaluations"] = ev
        for th, xs in zip(t2, x2):
            xs = _state_value(family, xs)
            cands.append((empirical_risk(family, th, xs, yy, loss), th, xs))

    if cfg.kind == "tracking":
        for th in _chaotic_thetas(family):
            if allowed is not None and th not in allowed:
                continue
            z = track_doubling(lambda k, u: loss(u, yy[k]), n, cfg.window, maximize=False)
            cands.append((empirical_risk(family, th, z, yy, loss), th, z))
            diag["tracking_candidates"] += 1

    best = cands[0]
    for c in cands[1:]:
        if _better(c[0], c[1], c[2], best[0], best[1], best[2]):
            best = c
    return best, diag


def _state_value(family, xs):
    if family.state_domain == "symbolic":
        return int(xs)
    arr = np.asarray(xs, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _random_axis_value(axis, rng):
    if axis.kind == "finite":
        return int(rng.integers(0, len(axis.labels)))
    return float(rng.uniform(axis.lo, axis.hi))


def _heavy_tail(family, theta, x, yy, loss) -> float:
    L = loss(orbit(family, theta, x, yy.size), yy)
    c = L - L.mean()
    m2 = np.mean(c ** 2)
    if m2 <= 0:
        return 0.0
    return float(np.mean(c ** 4) / m2 ** 2)


def fit(family: ModelFamily, y, loss: LossSpec | None = None, search: OptimizerConfig | None = None,
        seed: int = 0, random_starts: int = 0, thetas=None) -> FitResult:
    """Approximate joint minimizer of the empirical risk over (theta, x).

    Grid over theta (outer) and x (inner), coordinate-wise golden-section
    refinement on continuous axes, and, with ``kind="tracking"``, exact
    binary-digit tracking candidates for chaotic members.  Ties go to the
    lexicographically smallest theta, then the smallest x.  ``thetas``
    restricts the search to the listed parameters (refinement may still move
    continuous axes).
    """
    return estimator_sequence(family, y, loss, [len(_y(y))], search, seed, random_starts, thetas)


def estimator_sequence(family: ModelFamily, y, loss: LossSpec | None, horizons, search: OptimizerConfig | None = None,
                       seed: int = 0, random_starts: int = 0, thetas=None) -> FitResult:
    """Fit every prefix ``y[:n]``; the grid pass is shared through cumulative loss sums."""
    yy = _y(y)
    loss = loss or LossSpec()
    cfg = search or OptimizerConfig()
    horizons = [int(n) for n in horizons]
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])) or horizons[0] < 1:
        raise InvalidArgumentError("horizons must be positive and strictly increasing")
    if horizons[-1] > yy.size:
        raise InvalidArgumentError(f"largest horizon {horizons[-1]} exceeds the series length {yy.size}")
    if loss.kind == BREGMAN:
        loss.validate_for(family.bound_K, float(np.std(yy)))
    allowed = None
    if thetas is not None:
        allowed = [tuple(t) for t in thetas]
        for t in allowed:
            family.params.validate(t)
        if random_starts:
            raise InvalidArgumentError("random starts cannot be combined with a restricted parameter list")
    starts, grid_evals, partial, grid_shape = _grid_search(family, yy, loss, cfg, horizons, allowed)
    trace = []
    running = math.inf
    last = None
    for n, start in zip(horizons, starts):
        (risk, th, x), diag = _fit_prefix(family, yy[:n], loss, cfg, start, seed, random_starts, allowed)
        risk = empirical_risk(family, th, x, yy[:n], loss)
        running = min(running, risk)
        trace.append({"n": n, "theta": tuple(th), "x": x, "risk": risk, "running_min": running, "diagnostics": diag})
        last = (th, x, risk, diag)
    th, x, risk, diag = last
    kurt = _heavy_tail(family, th, x, yy, loss)
    diagnostics = {"grid_size": list(grid_shape), "grid_evaluations": grid_evals, **diag,
                   "loss_kurtosis": kurt, "heavy_tailed": kurt > KURTOSIS_WARN, "optimizer": cfg.kind}
    if kurt > KURTOSIS_WARN:
        warnings.warn(f"sample losses look heavy-tailed (kurtosis {kurt:.1f} > {KURTOSIS_WARN:g})", RuntimeWarning)
    return FitResult(tuple(th), x, risk, trace, diagnostics, partial)


# --------------------------------------------------------------------------
# auxiliary loss


@dataclass
class AuxiliaryLoss:
    """``L(u, v) = E l(u, v + eps_0)``; closed form for squared loss, Monte Carlo otherwise."""

    loss: LossSpec
    noise: NoiseModel
    draws: np.ndarray | None = None

    @property
    def exact(self) -> bool:
        return self.draws is None

    def evaluate(self, u, v):
        """Return ``(value, standard_error)``; the error is 0 for the closed form."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.draws is None:
            return (u - v) ** 2 + self.noise.variance + self.loss.offset, np.zeros(np.broadcast(u, v).shape)
        vals = self.loss(u[..., None], v[..., None] + self.draws)
        m = self.draws.size
        return vals.mean(axis=-1), vals.std(axis=-1, ddof=1) / math.sqrt(m)

    def __call__(self, u, v):
        return self.evaluate(u, v)[0]


def auxiliary_loss(loss: LossSpec, noise: NoiseModel, mc_samples: int = 100_000, seed: int = 0) -> AuxiliaryLoss:
    if loss.kind == SQUARED:
        return AuxiliaryLoss(loss, noise)
    if mc_samples < 2:
        raise InvalidArgumentError("Monte Carlo needs at least 2 samples")
    draws = noise.sample(seeding.stream(seed, "auxiliary_loss"), int(mc_samples))
    return AuxiliaryLoss(loss, noise, draws)


__all__ = [
    "LossSpec", "ObservedSeries", "FitResult", "AuxiliaryLoss", "signal_plus_noise", "signal_of",
    "empirical_risk", "fit", "estimator_sequence", "auxiliary_loss",
]
