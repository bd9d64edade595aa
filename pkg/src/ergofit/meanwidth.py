"""Monte Carlo mean width of a model family, the sigma_0 threshold and the Sudakov cross-check."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seeding
from .dynamics import orbits
from .errors import InvalidArgumentError
from .families import FINITE, TORUS, ModelFamily
from .tracking import WINDOW, track_noise, tracking_oracle_logistic4  # noqa: F401  (re-export)

GAUSSIAN = "gaussian"
UNIFORM = "uniform"
RADEMACHER = "rademacher"


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean i.i.d. noise; ``scale`` is sigma, the half-width or the +-amplitude."""

    kind: str = GAUSSIAN
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, UNIFORM, RADEMACHER):
            raise InvalidArgumentError(f"unknown noise kind {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidArgumentError("noise scale must be positive and finite")

    @property
    def variance(self) -> float:
        if self.kind == UNIFORM:
            return self.scale ** 2 / 3.0
        return self.scale ** 2

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == GAUSSIAN:
            return rng.normal(0.0, self.scale, size)
        if self.kind == UNIFORM:
            return rng.uniform(-self.scale, self.scale, size)
        return self.scale * (2.0 * rng.integers(0, 2, size) - 1.0)

    def to_dict(self) -> dict:
        key = {GAUSSIAN: "sigma", UNIFORM: "half_width", RADEMACHER: "scale"}[self.kind]
        return {"kind": self.kind, key: self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        kind = d.get("kind", GAUSSIAN)
        for key in ("sigma", "half_width", "scale"):
            if key in d:
                return cls(kind, float(d[key]))
        return cls(kind)


def gaussian(sigma: float = 1.0) -> NoiseModel:
    return NoiseModel(GAUSSIAN, sigma)


@dataclass(frozen=True)
class OptimizerConfig:
    """Search for the sup over (theta, x).

    kind: ``grid``, ``grid+refine`` or ``tracking``.  ``tracking`` solves the
    chaotic members listed in ``family.meta['chaotic_parameters']`` exactly
    through binary-digit tracking and grid-scans the remaining members.
    ``x_points`` of None picks 129 points on continuous state spaces and
    ``16 n`` positions on symbolic ones.
    """

    kind: str = "grid+refine"
    theta_resolution: tuple | None = None
    x_points: int | None = None
    refine_rounds: int = 1
    golden_iters: int = 20
    tol: float = 1e-6
    max_evaluations: int | None = None
    window: int = WINDOW
    chunk_rows: int = 8192

    def __post_init__(self):
        if self.kind not in ("grid", "grid+refine", "tracking"):
            raise InvalidArgumentError(f"unknown optimizer kind {self.kind!r}")
        if self.refine_rounds < 0 or self.golden_iters < 0:
            raise InvalidArgumentError("refinement counts must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_resolution"] = list(self.theta_resolution) if self.theta_resolution else None
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "OptimizerConfig":
        d = dict(d or {})
        if d.get("theta_resolution") is not None:
            d["theta_resolution"] = tuple(d["theta_resolution"])
        return cls(**d)


def state_points(family: ModelFamily, n: int, cfg: OptimizerConfig) -> np.ndarray:
    if family.state_domain == "symbolic":
        m = cfg.x_points if cfg.x_points is not None else 16 * int(n)
    else:
        m = cfg.x_points if cfg.x_points is not None else 129
    return family.state_grid(m)


def _chaotic_thetas(family: ModelFamily):
    vals = family.meta.get("chaotic_parameters", ())
    if family.params.dim != 1 or family.exact_orbit is None:
        return []
    return [(v,) for v in vals if family.params.contains((v,))]


# --------------------------------------------------------------------------
# grid scan shared by the mean-width and risk searches


def iter_grid_blocks(family: ModelFamily, thetas, xgrid, n: int, chunk_rows: int, limit: int | None = None):
    """Yield ``(start, theta_arrays, x_rows, orbit_block)`` over the (theta, x) grid.

    Rows enumerate theta outer and x inner; ``start`` is the flat index of
    the first row.  ``limit`` truncates the scan after that many rows.
    """
    m = xgrid.shape[0]
    chunk_rows = min(int(chunk_rows), max(256, 4_000_000 // int(n)))
    total = len(thetas) * m
    if limit is not None:
        total = min(total, int(limit))
    per = max(1, chunk_rows // m) if m < chunk_rows else 1
    t0 = 0
    while t0 * m < total:
        block = thetas[t0:t0 + per]
        if m <= chunk_rows or len(block) > 1:
            th_arrays = tuple(np.repeat(np.array([t[j] for t in block]), m) for j in range(family.params.dim))
            X = np.concatenate([xgrid] * len(block))
            start = t0 * m
            stop = min(start + X.shape[0], total)
            th_arrays = tuple(a[:stop - start] for a in th_arrays)
            X = X[:stop - start]
            yield start, th_arrays, X, orbits(family, th_arrays, X, n)
            t0 += len(block)
        else:
            th = block[0]
            for x0 in range(0, m, chunk_rows):
                start = t0 * m + x0
                if start >= total:
                    return
                X = xgrid[x0:x0 + min(chunk_rows, total - start)]
                yield start, th, X, orbits(family, th, X, n)
            t0 += 1


def _theta_grid(family: ModelFamily, cfg: OptimizerConfig, exclude=()):
    grid = family.params.grid(cfg.theta_resolution)
    ex = {tuple(e) for e in exclude}
    return [t for t in grid if t not in ex]


# --------------------------------------------------------------------------
# golden-section refinement in lockstep over many objectives


GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _axis_bounds(kind, lo, hi, center, half):
    a, b = center - half, center + half
    if kind != TORUS:
        a, b = np.maximum(a, lo), np.minimum(b, hi)
    return a, b


def refine_lockstep(family: ModelFamily, thetas: list, states: np.ndarray, values: np.ndarray,
                    objective, spacing_theta, spacing_x, rounds: int, iters: int, tol: float,
                    maximize: bool = True):
    """Coordinate-wise golden-section search for R independent problems at once.

    ``objective(theta_arrays, states)`` returns one value per row.  Every
    evaluated point is feasible and the best seen is kept, so values only
    improve.  Returns updated ``(thetas, states, values, evaluations)``.
    """
    R = len(thetas)
    if R == 0 or rounds == 0 or iters == 0:
        return thetas, states, values, 0
    sgn = 1.0 if maximize else -1.0
    dim = family.params.dim
    TH = np.array(thetas, dtype=float).reshape(R, dim)
    X = np.array(states, dtype=float)
    best = sgn * np.asarray(values, dtype=float).copy()
    coords = [("theta", j) for j in family.params.continuous_axes()]
    if family.state_domain != "symbolic":
        coords += [("x", j) for j in range(family.state_dim)]
    evals = 0

    def evaluate(TH_, X_):
        nonlocal evals
        evals += R
        return sgn * objective(tuple(TH_[:, j] if family.params.axes[j].kind != FINITE else TH_[:, j].astype(np.int64)
                                     for j in range(dim)), X_)

    for _ in range(rounds):
        for what, j in coords:
            if what == "theta":
                ax = family.params.axes[j]
                kind, lo, hi, half = ax.kind, ax.lo, ax.hi, spacing_theta[j]
                cur = TH[:, j]
            else:
                kind = TORUS if family.state_domain == TORUS else "interval"
                lo, hi, half = 0.0, 1.0, spacing_x
                cur = X[:, j] if X.ndim == 2 else X
            a, b = _axis_bounds(kind, lo, hi, cur.copy(), half)

            def at(v):
                TH2, X2 = TH.copy(), X.copy()
                if kind == TORUS:
                    v = v - np.floor(v)
                if what == "theta":
                    TH2[:, j] = v
                elif X2.ndim == 2:
                    X2[:, j] = v
                else:
                    X2 = v.copy()
                return TH2, X2

            c = b - GOLD * (b - a)
            d = a + GOLD * (b - a)
            fc = evaluate(*at(c))
            fd = evaluate(*at(d))
            for _ in range(iters):
                if np.all(b - a <= tol * max(hi - lo, 1e-300)):
                    break
                # maximize: keep [a, d] when c wins, else [c, b]
                left = fc >= fd
                a, b = np.where(left, a, c), np.where(left, d, b)
                c, d = np.where(left, b - GOLD * (b - a), d), np.where(left, c, a + GOLD * (b - a))
                fp = evaluate(*at(np.where(left, c, d)))
                fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
            for v, fv in ((c, fc), (d, fd)):
                better = fv > best
                if np.any(better):
                    TH2, X2 = at(v)
                    TH[better] = TH2[better]
                    X[better] = X2[better]
                    best = np.where(better, fv, best)
    out_thetas = [tuple(_py(TH[r, j], family.params.axes[j]) for j in range(dim)) for r in range(R)]
    return out_thetas, X, sgn * best, evals


def _py(v, axis):
    return int(round(v)) if axis.kind == FINITE else float(v)


# --------------------------------------------------------------------------
# mean width


@dataclass
class MeanWidthEntry:
    n: int
    replicates: int
    kappa: float
    stderr: float
    optimizer: str
    partial: bool = False
    maxima: np.ndarray = field(default=None, repr=False)
    argmax: list = field(default=None, repr=False)
    evaluations: int = 0

    @property
    def kappa_over_n(self) -> float:
        return self.kappa / self.n

    @property
    def stderr_over_n(self) -> float:
        return self.stderr / self.n

    def row(self) -> dict:
        return {"n": self.n, "kappa_over_n": self.kappa_over_n, "stderr": self.stderr_over_n,
                "replicates": self.replicates, "optimizer": self.optimizer, "partial": self.partial}


@dataclass
class MeanWidthReport:
    family_id: str
    noise: NoiseModel
    entries: list

    @property
    def horizons(self) -> list:
        return [e.n for e in self.entries]

    @property
    def estimates(self) -> list:
        return [(e.kappa_over_n, e.stderr_over_n) for e in self.entries]

    @property
    def replicates(self) -> int:
        return self.entries[0].replicates if self.entries else 0

    @property
    def optimizer(self) -> str:
        return self.entries[0].optimizer if self.entries else ""

    def entry(self, n: int) -> MeanWidthEntry:
        for e in self.entries:
            if e.n == n:
                return e
        raise InvalidArgumentError(f"horizon {n} not in the mean-width report")

    def subadditivity_violations(self, n_se: float = 3.0) -> list:
        """(m, n) pairs with kappa_{m+n} > kappa_m + kappa_n beyond ``n_se`` combined SEs."""
        by_n = {e.n: e for e in self.entries}
        bad = []
        for m, em in by_n.items():
            for n, en in by_n.items():
                if m <= n and m + n in by_n:
                    es = by_n[m + n]
                    se = math.sqrt(em.stderr ** 2 + en.stderr ** 2 + es.stderr ** 2)
                    if es.kappa > em.kappa + en.kappa + n_se * se:
                        bad.append((m, n))
        return bad

    def nonincreasing_violations(self, n_se: float = 3.0) -> list:
        """Consecutive horizons where kappa_n/n rises by more than ``n_se`` combined SEs."""
        bad = []
        for a, b in zip(self.entries, self.entries[1:]):
            se = math.hypot(a.stderr_over_n, b.stderr_over_n)
            if b.kappa_over_n > a.kappa_over_n + n_se * se:
                bad.append((a.n, b.n))
        return bad

    def to_csv(self, path=None) -> str:
        cols = ["n", "kappa_over_n", "stderr", "replicates", "optimizer"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for e in self.entries:
            w.writerow(e.row())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {"family_id": self.family_id, "noise": self.noise.to_dict(),
                "entries": [e.row() for e in self.entries]}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def noise_draws(noise: NoiseModel, n: int, replicates: int, seed: int, name: str = "mean_width") -> np.ndarray:
    """One independent stream per replicate; horizon-n draws are prefixes of longer ones."""
    return np.stack([noise.sample(seeding.stream(seed, name, 0, r), n) for r in range(replicates)])


def mean_width_n(family: ModelFamily, noise: NoiseModel, n: int, replicates: int,
                 optimizer: OptimizerConfig | None = None, seed: int = 0, eps: np.ndarray | None = None) -> MeanWidthEntry:
    """Monte Carlo estimate of ``E sup_(theta,x) sum_k f(T^k x) eps_k``.

    Each replicate's value is attained by a feasible model, so it is a lower
    bound on that replicate's supremum.
    """
    n = int(n)
    replicates = int(replicates)
    if n < 1 or replicates < 1:
        raise InvalidArgumentError("need n >= 1 and replicates >= 1")
    cfg = optimizer or OptimizerConfig()
    E = noise_draws(noise, n, replicates, seed) if eps is None else np.asarray(eps, dtype=float).reshape(replicates, n)
    best = np.full(replicates, -np.inf)
    arg_theta = [None] * replicates
    arg_x = [None] * replicates
    evals = 0
    partial = False

    chaotic = _chaotic_thetas(family) if cfg.kind == "tracking" else []
    thetas = _theta_grid(family, cfg, exclude=chaotic)
    xgrid = state_points(family, n, cfg)
    m = xgrid.shape[0]
    limit = cfg.max_evaluations
    if limit is not None and len(thetas) * m > limit:
        partial = True
    if thetas:
        for start, th, X, O in iter_grid_blocks(family, thetas, xgrid, n, cfg.chunk_rows, limit):
            S = O @ E.T
            idx = np.argmax(S, axis=0)
            val = S[idx, np.arange(replicates)]
            evals += O.shape[0]
            upd = val > best
            for r in np.nonzero(upd)[0]:
                flat = start + int(idx[r])
                arg_theta[r] = thetas[flat // m]
                arg_x[r] = xgrid[flat % m]
            best = np.where(upd, val, best)

    if cfg.kind == "grid+refine" and thetas and not partial:
        spacing_t = [a.spacing(None if cfg.theta_resolution is None else cfg.theta_resolution[j])
                     for j, a in enumerate(family.params.axes)]
        spacing_x = 1.0 / max(m - 1, 1)
        sel = [r for r in range(replicates) if arg_theta[r] is not None]
        if sel and (family.params.continuous_axes() or family.state_domain != "symbolic"):
            Es = E[sel]

            def objective(th, X):
                return np.einsum("ij,ij->i", orbits(family, th, X, n), Es)

            t2, x2, v2, ev = refine_lockstep(family, [arg_theta[r] for r in sel], np.array([arg_x[r] for r in sel]),
                                             best[sel], objective, spacing_t, spacing_x, cfg.refine_rounds,
                                             cfg.golden_iters, cfg.tol, maximize=True)
            evals += ev
            for i, r in enumerate(sel):
                if v2[i] > best[r]:
                    best[r], arg_theta[r], arg_x[r] = v2[i], t2[i], x2[i]

    for th in chaotic:
        for r in range(replicates):
            z, v = track_noise(E[r], cfg.window)
            evals += 1
            if v > best[r]:
                best[r], arg_theta[r], arg_x[r] = v, th, z

    kappa = float(best.mean())
    se = float(best.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    label = cfg.kind if not partial else cfg.kind + " (partial)"
    return MeanWidthEntry(n, replicates, kappa, se, label, partial, best,
                          list(zip(arg_theta, arg_x)), evals)


def mean_width(family: ModelFamily, noise: NoiseModel, horizons, replicates: int,
               optimizer: OptimizerConfig | None = None, seed: int = 0) -> MeanWidthReport:
    horizons = [int(n) for n in horizons]
    E = noise_draws(noise, max(horizons), replicates, seed)
    entries = [mean_width_n(family, noise, n, replicates, optimizer, seed, eps=E[:, :n]) for n in horizons]
    return MeanWidthReport(family.id, noise, entries)


def sigma0(bound_K: float, kappa_G: float) -> float:
    """Noise level ``K^2 / (2 kappa_G)`` beyond which least squares can lock onto noise."""
    if not kappa_G > 0:
        raise InvalidArgumentError("kappa_G must be positive; the threshold is undefined for zero-width families")
    return float(bound_K) ** 2 / (2.0 * float(kappa_G))


@dataclass(frozen=True)
class SudakovCell:
    n: int
    delta: float
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs


def sudakov_check(report, width: MeanWidthReport) -> list:
    """Compare ``kappa_n/n + 3 SE`` with ``(delta/6) sqrt(log N(delta, d_{n,2}) / n)``."""
    if report.family_id != width.family_id:
        raise InvalidArgumentError(f"family mismatch: {report.family_id!r} vs {width.family_id!r}")
    if not report.p == 2.0:
        raise InvalidArgumentError("the Sudakov check needs a p = 2 complexity report")
    out = []
    for e in width.entries:
        if e.n not in report.horizons:
            continue
        for delta in report.radii:
            N = report.N(e.n, delta)
            lhs = e.kappa_over_n + 3.0 * e.stderr_over_n
            rhs = delta / 6.0 * math.sqrt(math.log(N) / e.n)
            out.append(SudakovCell(e.n, float(delta), lhs, rhs))
    if not out:
        raise InvalidArgumentError("no common horizons between the complexity and mean-width reports")
    return out


__all__ = [
    "NoiseModel", "OptimizerConfig", "MeanWidthEntry", "MeanWidthReport", "SudakovCell", "gaussian",
    "mean_width", "mean_width_n", "noise_draws", "sigma0", "sudakov_check", "tracking_oracle_logistic4",
    "refine_lockstep", "iter_grid_blocks", "state_points",
]
