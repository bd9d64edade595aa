"""Named experiments, their default settings, and verdicts keyed to criteria ids.

Every experiment has an optional seed-independent ``prepare`` step (tables
without a ``seed`` column) and a ``run_seed`` step producing rows tagged
with the seed.  Verdict functions read nothing but those tables.
"""
from __future__ import annotations

import copy
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import seeding
from .complexity import (DEFAULT_MAX_CELLS, ComplexityReport, QuantizedProcess, entropy_profile,
                         packing_bound_check, random_probe_set)
from .config import ExperimentConfig, check_params
from .distortion import (MAX_LP_VARIABLES, cost_table, distortion_bounds, distortion_upper_bound, quantize,
                         signal_noise_identity_check)
from .dynamics import orbit, sample_sequences
from .erm import LossSpec, auxiliary_loss, estimator_sequence, fit, signal_plus_noise
from .errors import ConfigError, ResourceBudgetError
from .families import build_family
from .meanwidth import NoiseModel, OptimizerConfig, mean_width, mean_width_n, sigma0, sudakov_check
from .report import RunReport, Table, Verdict

# acceptance thresholds; deliberately not configurable
ENTROPY_RANGE = (0.55, 0.75)
ENTROPY_GAP = 0.15
ZERO_ENTROPY_MAX = 0.1
ZERO_WIDTH_FACTOR = 0.1
POSITIVE_WIDTH_MIN = 0.2
CONSISTENCY_TOL = 0.05
CONSISTENCY_RATE = 0.9
TRACE_TOL = 0.02
TRACE_RATE = 0.8
INCONSISTENCY_RATE = 0.9
RISK_MARGIN = 0.1
MC_SE = 3.0
SANDWICH_TOL = 1e-9
PRODUCT_TOL = 1e-6
EXACT_TOL = 1e-12
IDENTITY_GAP = 0.1
N_SE = 3.0


@dataclass
class Context:
    cfg: ExperimentConfig
    settings: dict
    max_cells: int = DEFAULT_MAX_CELLS
    max_evaluations: int | None = None
    max_lp_variables: int = MAX_LP_VARIABLES

    def optimizer(self, spec: dict | None) -> OptimizerConfig:
        d = dict(spec or {})
        if self.max_evaluations is not None and d.get("max_evaluations") is None:
            d["max_evaluations"] = self.max_evaluations
        return OptimizerConfig.from_dict(d)


@dataclass(frozen=True)
class Experiment:
    name: str
    criteria: tuple
    description: str
    defaults: dict
    tables: dict
    run_seed: Callable | None
    verdicts: Callable
    prepare: Callable | None = None
    plot: tuple = ()
    aggregate: Callable | None = None


REGISTRY: dict = {}


def register(exp: Experiment) -> Experiment:
    REGISTRY[exp.name] = exp
    return exp


# --------------------------------------------------------------------------
# helpers


def _family(spec: dict):
    try:
        return build_family(spec["id"], **spec.get("args", {}))
    except TypeError as exc:
        raise ConfigError(f"bad arguments for family {spec['id']!r}: {exc}", ("family", "args")) from None


def _x_grid(family, grid: dict):
    m = int(grid.get("x_points", 129))
    if grid.get("x_grid", "uniform") == "conjugate":
        if family.state_domain != "interval":
            raise ConfigError("the conjugate x-grid needs an interval state space", ("grid", "x_grid"))
        # image of a uniform angle grid under x = sin^2(pi z / 2)
        z = (np.arange(m) + 0.5) / m
        return np.sin(0.5 * np.pi * z) ** 2
    return family.state_grid(m)


def _theta_grid(family, grid: dict):
    res = grid.get("theta_resolution")
    return family.params.grid(None if res is None else tuple(res))


def _entropy_rows(table: Table, rep, **tags):
    for row in rep.rows():
        table.add(**tags, **row)


def _p_values(ps):
    return [math.inf if p == "inf" else float(p) for p in ps]


def _p_key(p) -> float:
    # CSV cells "inf" and "2.0" both parse to floats; configs may still hold the string
    return math.inf if p == "inf" else float(p)


def _mean_se(xs):
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return math.nan, math.nan
    se = float(xs.std(ddof=1) / math.sqrt(xs.size)) if xs.size > 1 else 0.0
    return float(xs.mean()), se


def _group(rows, *keys):
    out = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


ENTROPY_COLS = ["family", "p", "n", "r", "N", "M", "slope"]
SLOPE_COLS = ["family", "p", "r", "slope"]


def _entropy_tables(ctx: Context, families: list, ps) -> dict:
    ent = Table("entropy", list(ENTROPY_COLS))
    slopes = Table("slopes", list(SLOPE_COLS))
    for spec in families:
        fam = _family(spec["family"])
        grid = spec.get("grid", {})
        thetas = _theta_grid(fam, grid)
        xs = _x_grid(fam, grid)
        horizons = ctx.settings["horizons"]
        size = len(thetas) * xs.shape[0]
        if size * max(horizons) > ctx.max_cells:
            raise ResourceBudgetError(f"{spec['label']}: {size} sequences at n={max(horizons)} exceed "
                                      f"the budget of {ctx.max_cells} cells")
        sample = sample_sequences(fam, thetas, xs, max(horizons))
        for p in _p_values(ps):
            rep = entropy_profile(None, None, None, ctx.settings["radii"], horizons, p, sample=sample,
                                  max_cells=ctx.max_cells)
            _entropy_rows(ent, rep, family=spec["label"])
            for r, s in zip(rep.radii, rep.slopes):
                slopes.add(family=spec["label"], p="inf" if math.isinf(p) else p, r=r, slope=s)
        del sample
    return {"entropy": ent, "slopes": slopes}


# --------------------------------------------------------------------------
# entropy equality


def _prepare_entropy_equality(ctx: Context) -> dict:
    s = ctx.settings
    spec = {"label": s["family"]["id"], "family": s["family"], "grid": s["grid"]}
    return _entropy_tables(ctx, [spec], s["p"])


def _verdict_entropy_equality(tables: dict, settings: dict) -> dict:
    v = Verdict("C1", True)
    rows = tables["slopes"].rows
    if not rows:
        v.check("slopes present", 0, ">=1", False)
    for (fam, r), grp in sorted(_group(rows, "family", "r").items()):
        by_p = {_p_key(row["p"]): row["slope"] for row in grp}
        h_inf, h_2 = by_p.get(math.inf), by_p.get(2.0)
        for label, h in (("inf", h_inf), ("2", h_2)):
            ok = h is not None and ENTROPY_RANGE[0] <= h <= ENTROPY_RANGE[1]
            v.check(f"{fam} h_{label}(r={r}) in range", h, list(ENTROPY_RANGE), ok)
        gap = abs(h_2 - h_inf) if h_inf is not None and h_2 is not None else math.nan
        v.check(f"{fam} |h_2 - h_inf|(r={r})", gap, ENTROPY_GAP, gap <= ENTROPY_GAP)
    return {"C1": v}


register(Experiment(
    name="entropy_equality",
    criteria=("C1",),
    description="covering-entropy slopes in d_{n,2} and d_{n,inf} for the full logistic family",
    defaults={
        "family": {"id": "logistic", "args": {"a_lo": 4.0, "a_hi": 4.0}},
        "grid": {"x_points": 4_000_000, "x_grid": "conjugate"},
        "radii": [0.05],
        "horizons": [10, 12, 14, 16, 18],
        "p": ["inf", 2],
    },
    tables={"entropy": ENTROPY_COLS, "slopes": SLOPE_COLS},
    run_seed=None,
    prepare=_prepare_entropy_equality,
    verdicts=_verdict_entropy_equality,
    plot=(("entropy", "n", "N", ("family", "p", "r")),),
))


# --------------------------------------------------------------------------
# zero-entropy families


def _prepare_zero_entropy(ctx: Context) -> dict:
    return _entropy_tables(ctx, ctx.settings["families"], ctx.settings["p"])


def _verdict_zero_entropy(tables: dict, settings: dict) -> dict:
    v = Verdict("C2", True)
    rows = tables["slopes"].rows
    if not rows:
        v.check("slopes present", 0, ">=1", False)
    for row in rows:
        v.check(f"{row['family']} h_{row['p']}(r={row['r']})", row["slope"], ZERO_ENTROPY_MAX,
                row["slope"] <= ZERO_ENTROPY_MAX)
    return {"C2": v}


ZERO_ENTROPY_ENTROPY = [
    {"label": "rotation", "family": {"id": "rotation", "args": {"resolution": 256}}, "grid": {"x_points": 256}},
    {"label": "subcritical_logistic", "family": {"id": "logistic", "args": {"a_lo": 0.0, "a_hi": 3.5, "resolution": 351}},
     "grid": {"x_points": 1000}},
    {"label": "thue_morse", "family": {"id": "substitution", "args": {"rules": "thue_morse"}},
     "grid": {"x_points": 65536}},
]

register(Experiment(
    name="zero_entropy_families",
    criteria=("C2",),
    description="covering-entropy slopes for rotation, subcritical logistic and Thue-Morse families",
    defaults={"families": ZERO_ENTROPY_ENTROPY, "radii": [0.05], "horizons": [10, 12, 14, 16, 18], "p": ["inf"]},
    tables={"entropy": ENTROPY_COLS, "slopes": SLOPE_COLS},
    run_seed=None,
    prepare=_prepare_zero_entropy,
    verdicts=_verdict_zero_entropy,
    plot=(("entropy", "n", "N", ("family", "p", "r")),),
))


# --------------------------------------------------------------------------
# mean width


MW_COLS = ["seed", "family", "role", "n", "kappa_over_n", "stderr", "replicates", "optimizer", "partial", "bound"]


def _run_mean_width(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    noise = NoiseModel.from_dict(s["noise"])
    t = Table("mean_width", list(MW_COLS))
    partial = False
    for role, specs in (("zero_entropy", s["zero_entropy"]), ("chaotic", s["chaotic"])):
        for spec in specs:
            fam = _family(spec["family"])
            horizons = spec.get("horizons", s["horizons"])
            rep = mean_width(fam, noise, horizons, s["replicates"], ctx.optimizer(spec.get("optimizer")), seed)
            bound = ZERO_WIDTH_FACTOR * noise.std * fam.bound_K
            for e in rep.entries:
                t.add(seed=seed, family=spec["label"], role=role, n=e.n, kappa_over_n=e.kappa_over_n,
                      stderr=e.stderr_over_n, replicates=e.replicates, optimizer=e.optimizer, partial=e.partial,
                      bound=bound)
                partial = partial or e.partial
    return {"mean_width": t, "_partial": partial}


def _zero_width_checks(v: Verdict, rows):
    for (seed, fam), grp in sorted(_group([r for r in rows if r["role"] == "zero_entropy"], "seed", "family").items()):
        grp = sorted(grp, key=lambda r: r["n"])
        last = grp[-1]
        v.check(f"seed {seed} {fam} kappa/n at n={last['n']}", last["kappa_over_n"], last["bound"],
                last["kappa_over_n"] <= last["bound"])
        for a, b in zip(grp, grp[1:]):
            se = math.hypot(a["stderr"], b["stderr"])
            v.check(f"seed {seed} {fam} nonincreasing {a['n']}->{b['n']}", b["kappa_over_n"] - a["kappa_over_n"],
                    N_SE * se, b["kappa_over_n"] <= a["kappa_over_n"] + N_SE * se)


def _verdict_mean_width(tables: dict, settings: dict) -> dict:
    rows = tables["mean_width"].rows
    c3 = Verdict("C3", True)
    _zero_width_checks(c3, rows)
    c4 = Verdict("C4", True)
    for r in rows:
        if r["role"] == "chaotic":
            c4.check(f"seed {r['seed']} {r['family']} kappa/n at n={r['n']}", r["kappa_over_n"], POSITIVE_WIDTH_MIN,
                     r["kappa_over_n"] >= POSITIVE_WIDTH_MIN)
    for v in (c3, c4):
        if not v.checks:
            v.check("rows present", 0, ">=1", False)
    return {"C3": c3, "C4": c4}


ZERO_ENTROPY_WIDTH = [
    {"label": "rotation", "family": {"id": "rotation", "args": {"resolution": 2048}},
     "optimizer": {"kind": "grid+refine", "x_points": 32}},
    {"label": "subcritical_logistic", "family": {"id": "logistic", "args": {"a_lo": 0.0, "a_hi": 3.5, "resolution": 71}},
     "optimizer": {"kind": "grid+refine", "x_points": 129}},
    {"label": "thue_morse", "family": {"id": "substitution", "args": {"rules": "thue_morse"}},
     "optimizer": {"kind": "grid"}},
]
CHAOTIC_WIDTH = [
    {"label": "full_logistic", "family": {"id": "logistic", "args": {"a_lo": 4.0, "a_hi": 4.0}},
     "optimizer": {"kind": "tracking"}, "horizons": [128, 256]},
]

register(Experiment(
    name="mean_width",
    criteria=("C3", "C4"),
    description="Monte Carlo Gaussian mean width for zero-entropy families and the full logistic family",
    defaults={"noise": {"kind": "gaussian", "sigma": 1.0}, "horizons": [64, 128, 256, 512], "replicates": 64,
              "zero_entropy": ZERO_ENTROPY_WIDTH, "chaotic": CHAOTIC_WIDTH},
    tables={"mean_width": MW_COLS},
    run_seed=_run_mean_width,
    verdicts=_verdict_mean_width,
    plot=(("mean_width", "n", "kappa_over_n", ("family",)),),
))


# --------------------------------------------------------------------------
# consistency (subcritical logistic)


TRACE_COLS = ["seed", "n", "theta_hat", "abs_error", "risk", "running_min"]


def _run_consistency(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    fam = _family(s["family"])
    truth = list(s["theta_true"])
    signal = {"kind": "orbit", "family": s["family"]["id"], "family_args": s["family"].get("args", {}),
              "theta": truth, "burn_in": s["burn_in"]}
    y = signal_plus_noise(signal, s["noise"], s["n"], seed, key=ctx.cfg.experiment)
    res = estimator_sequence(fam, y, LossSpec.from_dict(s["loss"]), s["horizons"], ctx.optimizer(s["optimizer"]),
                             seed=seed)
    t = Table("trace", list(TRACE_COLS))
    for tr in res.trace:
        t.add(seed=seed, n=tr["n"], theta_hat=float(tr["theta"][0]), abs_error=abs(float(tr["theta"][0]) - truth[0]),
              risk=tr["risk"], running_min=tr["running_min"])
    return {"trace": t, "_partial": res.partial}


def _consistency_rates(rows):
    final_ok, mono_ok = [], []
    for seed, grp in sorted(_group(rows, "seed").items()):
        grp = sorted(grp, key=lambda r: r["n"])
        final_ok.append(grp[-1]["abs_error"] <= CONSISTENCY_TOL)
        tail = [r["abs_error"] for r in grp[-3:]]
        mono_ok.append(all(b <= a + TRACE_TOL for a, b in zip(tail, tail[1:])))
    return final_ok, mono_ok


def _verdict_consistency(tables: dict, settings: dict) -> dict:
    v = Verdict("C5", True)
    final_ok, mono_ok = _consistency_rates(tables["trace"].rows)
    if not final_ok:
        v.check("seeds present", 0, ">=1", False)
        return {"C5": v}
    r1 = sum(final_ok) / len(final_ok)
    r2 = sum(mono_ok) / len(mono_ok)
    v.check("fraction |a_hat - a*| <= 0.05", r1, CONSISTENCY_RATE, r1 >= CONSISTENCY_RATE)
    v.check("fraction of traces nonincreasing within 0.02", r2, TRACE_RATE, r2 >= TRACE_RATE)
    return {"C5": v}


def _aggregate_consistency(tables: dict, settings: dict) -> dict:
    rows = tables["trace"].rows
    final_ok, mono_ok = _consistency_rates(rows)
    nmax = max((r["n"] for r in rows), default=0)
    err, se = _mean_se([r["abs_error"] for r in rows if r["n"] == nmax])
    return {"pass_rate": (sum(final_ok) / len(final_ok)) if final_ok else math.nan,
            "trace_pass_rate": (sum(mono_ok) / len(mono_ok)) if mono_ok else math.nan,
            "mean_abs_error": err, "stderr_abs_error": se, "seeds": len(final_ok)}


register(Experiment(
    name="consistency_subcritical",
    criteria=("C5",),
    description="least squares estimates of the logistic parameter from noisy subcritical orbits",
    defaults={"family": {"id": "logistic", "args": {"a_lo": 0.0, "a_hi": 3.5, "resolution": 71}},
              "theta_true": [3.2], "burn_in": 1000, "noise": {"kind": "gaussian", "sigma": 0.25}, "n": 2000,
              "horizons": [250, 500, 1000, 2000], "loss": {"kind": "squared"},
              "optimizer": {"kind": "grid+refine", "refine_rounds": 2}},
    tables={"trace": TRACE_COLS},
    run_seed=_run_consistency,
    verdicts=_verdict_consistency,
    aggregate=_aggregate_consistency,
    plot=(("trace", "n", "abs_error", ()),),
))


# --------------------------------------------------------------------------
# inconsistency (identity vs chaos)


KAPPA_COLS = ["n", "kappa_over_n", "stderr", "replicates", "bound_K", "sigma0", "sigma"]
FIT_COLS = ["seed", "n", "theta_hat", "risk", "risk_theta0", "risk_theta1"]


def _prepare_inconsistency(ctx: Context) -> dict:
    s = ctx.settings
    fam = _family(s["family"])
    kg = s["kappa"]
    entry = mean_width_n(fam, NoiseModel.from_dict(kg["noise"]), kg["n"], kg["replicates"],
                         ctx.optimizer(kg["optimizer"]), seed=ctx.cfg.seeds[0])
    t = Table("kappa_G", list(KAPPA_COLS))
    t.add(n=entry.n, kappa_over_n=entry.kappa_over_n, stderr=entry.stderr_over_n, replicates=entry.replicates,
          bound_K=fam.bound_K, sigma0=sigma0(fam.bound_K, entry.kappa_over_n), sigma=NoiseModel.from_dict(s["noise"]).std)
    return {"kappa_G": t, "_partial": entry.partial}


def _run_inconsistency(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    fam = _family(s["family"])
    loss = LossSpec.from_dict(s["loss"])
    opt = ctx.optimizer(s["optimizer"])
    y = signal_plus_noise(s["signal"], s["noise"], s["n"], seed, key=ctx.cfg.experiment)
    res = estimator_sequence(fam, y, loss, s["horizons"], opt, seed=seed)
    thetas = fam.params.grid()
    n = s["horizons"][-1]
    r0 = fit(fam, y.prefix(n), loss, opt, seed=seed, thetas=[thetas[0]])
    r1 = fit(fam, y.prefix(n), loss, opt, seed=seed, thetas=[thetas[1]])
    t = Table("fits", list(FIT_COLS))
    for tr in res.trace:
        t.add(seed=seed, n=tr["n"], theta_hat=tr["theta"][0], risk=tr["risk"],
              risk_theta0=r0.risk if tr["n"] == n else None, risk_theta1=r1.risk if tr["n"] == n else None)
    return {"fits": t, "_partial": res.partial or r0.partial or r1.partial}


def _verdict_inconsistency(tables: dict, settings: dict) -> dict:
    v = Verdict("C6", True)
    kg = tables["kappa_G"].rows
    rows = tables["fits"].rows
    if not kg or not rows:
        v.check("rows present", 0, ">=1", False)
        return {"C6": v}
    sig = kg[0]["sigma"]
    v.check("sigma > sigma0_hat", sig, kg[0]["sigma0"], sig > kg[0]["sigma0"])
    chaotic = settings["chaotic_theta"]
    nmax = max(r["n"] for r in rows)
    final = [r for r in rows if r["n"] == nmax]
    rate = sum(r["theta_hat"] == chaotic for r in final) / len(final)
    v.check(f"fraction theta_hat = theta1 at n={nmax}", rate, INCONSISTENCY_RATE, rate >= INCONSISTENCY_RATE)
    thr = sig ** 2 - RISK_MARGIN
    m1 = float(np.mean([r["risk_theta1"] for r in final]))
    m0 = float(np.mean([r["risk_theta0"] for r in final]))
    v.check("mean risk under theta1 < sigma^2 - 0.1", m1, thr, m1 < thr)
    v.check("mean risk under theta0 >= sigma^2 - 0.1", m0, thr, m0 >= thr)
    return {"C6": v}


def _aggregate_inconsistency(tables: dict, settings: dict) -> dict:
    rows = tables["fits"].rows
    kg = tables["kappa_G"].rows
    out = {"kappa_G": kg[0]["kappa_over_n"] if kg else math.nan, "sigma0": kg[0]["sigma0"] if kg else math.nan}
    if rows:
        nmax = max(r["n"] for r in rows)
        final = [r for r in rows if r["n"] == nmax]
        out["theta1_rate"] = sum(r["theta_hat"] == settings["chaotic_theta"] for r in final) / len(final)
        for key in ("risk_theta0", "risk_theta1"):
            out[f"mean_{key}"], out[f"stderr_{key}"] = _mean_se([r[key] for r in final])
        later = [r for r in rows if r["n"] >= 128]
        out["theta1_rate_all_horizons"] = sum(r["theta_hat"] == settings["chaotic_theta"] for r in later) / len(later)
    return out


register(Experiment(
    name="inconsistency_sigma",
    criteria=("C6",),
    description="least squares locks onto the chaotic member once the noise exceeds the width threshold",
    defaults={"family": {"id": "identity_vs_chaos"}, "signal": {"kind": "constant", "value": 0.5},
              "noise": {"kind": "gaussian", "sigma": 3.0}, "n": 512, "horizons": [128, 256, 512],
              "loss": {"kind": "squared"}, "optimizer": {"kind": "tracking"}, "chaotic_theta": 1,
              "kappa": {"n": 512, "replicates": 64, "noise": {"kind": "gaussian", "sigma": 1.0},
                        "optimizer": {"kind": "tracking"}}},
    tables={"kappa_G": KAPPA_COLS, "fits": FIT_COLS},
    run_seed=_run_inconsistency,
    prepare=_prepare_inconsistency,
    verdicts=_verdict_inconsistency,
    aggregate=_aggregate_inconsistency,
    plot=(("fits", "n", "risk", ()),),
))


# --------------------------------------------------------------------------
# distortion lab


PAIR_COLS = ["seed", "pair", "k", "cost", "lower", "upper", "joining", "product"]
IDENT_COLS = ["seed", "scenario", "n", "k", "sigma", "lhs", "rhs", "gap"]


def _lab_pairs(seed: int, s: dict):
    """(name, P, Q, cost kind, k) for the fixed and sampled pairs."""
    rng = seeding.stream(seed, "distortion_lab")
    iid = QuantizedProcess.iid([0.5, 0.5], (0, 1), k=4)
    const0 = QuantizedProcess.periodic([0], (0, 1), k=4)
    per2 = QuantizedProcess.periodic([0, 1], (0, 1), k=4)
    per2_swap = QuantizedProcess.periodic([1, 0], (0, 1), k=4)
    out = [("point_mass_vs_iid", const0, iid, "hamming", 1)]
    for k in s["period2_ks"]:
        out.append(("period2_vs_iid", per2, iid, "hamming", k))
    out.append(("p_equals_q", iid, iid, "hamming", 2))
    out.append(("period2_phase_pair", per2, per2_swap, "hamming", 2))
    n = s["sample_length"]
    coin = rng.integers(0, 2, n).astype(float)
    lx = orbit(build_family("logistic", a_lo=4.0, a_hi=4.0), (4.0,), float(rng.uniform(0.1, 0.9)), n + 1000)[1000:]
    qlog = quantize(lx, [0.5], 3)
    qcoin = quantize(coin, [0.5], 3)
    out.append(("logistic_vs_coin", qlog, qcoin, "hamming", 3))
    rot = build_family("rotation", resolution=64)
    rx = orbit(rot, (float(rng.uniform(0, 1)), 0), np.array([0.0]), n)
    bins = [-0.5, 0.0, 0.5]
    out.append(("logistic_vs_rotation", quantize(2 * lx - 1, bins, 2, (-1, 1)), quantize(rx, bins, 2, (-1, 1)),
                "squared", 2))
    return out


def _run_distortion_lab(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    pairs = Table("pairs", list(PAIR_COLS))
    for name, P, Q, kind, k in _lab_pairs(seed, s):
        c = cost_table(P, Q, kind)
        b = distortion_bounds(P, Q, c, k, ctx.max_lp_variables)
        pairs.add(seed=seed, pair=name, k=k, cost=kind, lower=b.lower, upper=b.upper, joining=b.joining_used,
                  product=distortion_upper_bound(P, Q, c, "product"))
    ident = Table("identity", list(IDENT_COLS))
    for sc in s["scenarios"]:
        fam = _family(sc["family"])
        n = sc["n"]
        if sc["signal"]["kind"] == "constant":
            V = np.full(n, float(sc["signal"]["value"]))
        else:
            x0 = np.asarray(sc["signal"]["x0"], dtype=float)
            V = orbit(fam, tuple(sc["signal"]["theta"]), x0, n)
        if "candidates" in sc:
            cands = [(tuple(c["theta"]), np.asarray(c["x0"], dtype=float)) for c in sc["candidates"]]
        else:
            cands = [(th, np.asarray(sc["candidate_x0"], dtype=float)) for th in fam.params.grid()]
        lo, hi, step = sc["bins"]
        bins = np.arange(lo, hi + 1e-9, step)
        r = signal_noise_identity_check(fam, V, sc["sigma"], n, sc["k"], bins, seed=seed, candidates=cands,
                                        burn_in=sc.get("burn_in", 0), max_variables=ctx.max_lp_variables)
        ident.add(seed=seed, scenario=sc["label"], n=n, k=sc["k"], sigma=sc["sigma"], lhs=r.lhs, rhs=r.rhs, gap=r.gap)
    return {"pairs": pairs, "identity": ident}


def _verdict_distortion(tables: dict, settings: dict) -> dict:
    c8 = Verdict("C8", True)
    rows = tables["pairs"].rows
    for r in rows:
        c8.check(f"seed {r['seed']} {r['pair']} k={r['k']} lower <= upper", r["lower"] - r["upper"], SANDWICH_TOL,
                 r["lower"] <= r["upper"] + SANDWICH_TOL)
        if r["pair"] == "point_mass_vs_iid":
            c8.check(f"seed {r['seed']} point mass vs iid = 0.5", r["lower"], 0.5, abs(r["lower"] - 0.5) <= EXACT_TOL)
        if r["pair"] == "period2_vs_iid" and r["k"] == 2:
            d = abs(r["lower"] - r["product"])
            c8.check(f"seed {r['seed']} period-2 vs iid k=2 LP vs product", d, PRODUCT_TOL, d <= PRODUCT_TOL)
        if r["pair"] == "p_equals_q":
            c8.check(f"seed {r['seed']} P = Q gives 0", r["lower"], 0.0, abs(r["lower"]) <= EXACT_TOL)
    if not rows:
        c8.check("rows present", 0, ">=1", False)
    c9 = Verdict("C9", True)
    for r in tables["identity"].rows:
        c9.check(f"seed {r['seed']} {r['scenario']} gap", r["gap"], IDENTITY_GAP, r["gap"] <= IDENTITY_GAP)
    if not tables["identity"].rows:
        c9.check("rows present", 0, ">=1", False)
    return {"C8": c8, "C9": c9}


IDENTITY_SCENARIOS = [
    {"label": "constant_half", "family": {"id": "identity_vs_chaos"}, "signal": {"kind": "constant", "value": 0.5},
     "candidates": [{"theta": [0], "x0": float(x)} for x in np.round(np.linspace(0.0, 1.0, 21), 12)],
     "sigma": 1.0, "n": 20000, "k": 1, "bins": [-3.5, 4.5, 0.25]},
    {"label": "rotation_own_orbit", "family": {"id": "rotation", "args": {"resolution": 8}},
     "signal": {"kind": "orbit", "theta": [0.25, 0], "x0": [0.0]}, "candidate_x0": [0.0],
     "sigma": 0.5, "n": 40000, "k": 2, "bins": [-2.5, 2.5, 0.5]},
]

register(Experiment(
    name="distortion_lab",
    criteria=("C8", "C9"),
    description="coupling-LP lower bounds against explicit joinings, and the signal-plus-noise identity",
    defaults={"period2_ks": [1, 2, 3, 4], "sample_length": 100_000, "scenarios": IDENTITY_SCENARIOS},
    tables={"pairs": PAIR_COLS, "identity": IDENT_COLS},
    run_seed=_run_distortion_lab,
    verdicts=_verdict_distortion,
    plot=(("pairs", "k", "lower", ("pair",)), ("pairs", "k", "upper", ("pair",))),
))


# --------------------------------------------------------------------------
# Sudakov cross-check


CELL_COLS = ["seed", "family", "n", "delta", "N", "lhs", "rhs", "margin"]
SMW_COLS = ["seed", "family", "n", "kappa_over_n", "stderr", "optimizer", "partial"]


def _prepare_sudakov(ctx: Context) -> dict:
    return _entropy_tables(ctx, ctx.settings["families"], [2])


def _run_sudakov(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    noise = NoiseModel.from_dict(s["noise"])
    cells = Table("cells", list(CELL_COLS))
    mw = Table("sudakov_width", list(SMW_COLS))
    partial = False
    ent = shared["entropy"]
    for spec in s["families"]:
        fam = _family(spec["family"])
        rep = mean_width(fam, noise, s["horizons"], s["replicates"], ctx.optimizer(spec.get("optimizer")), seed)
        for e in rep.entries:
            mw.add(seed=seed, family=spec["label"], n=e.n, kappa_over_n=e.kappa_over_n, stderr=e.stderr_over_n,
                   optimizer=e.optimizer, partial=e.partial)
            partial = partial or e.partial
        crep = _report_from_rows(ent.where(family=spec["label"]), fam.id)
        for c in sudakov_check(crep, rep):
            cells.add(seed=seed, family=spec["label"], n=c.n, delta=c.delta, N=crep.N(c.n, c.delta), lhs=c.lhs,
                      rhs=c.rhs, margin=c.margin)
    return {"cells": cells, "sudakov_width": mw, "_partial": partial}


def _report_from_rows(rows, family_id):
    horizons = sorted({r["n"] for r in rows})
    radii = sorted({r["r"] for r in rows})
    N = np.zeros((len(horizons), len(radii)), dtype=np.int64)
    M = np.zeros_like(N)
    for r in rows:
        i, j = horizons.index(r["n"]), radii.index(r["r"])
        N[i, j], M[i, j] = r["N"], r["M"]
    return ComplexityReport(2.0, radii, horizons, M, N, [math.nan] * len(radii), family_id=family_id)


def _verdict_sudakov(tables: dict, settings: dict) -> dict:
    v = Verdict("C11", True)
    for r in tables["cells"].rows:
        v.check(f"seed {r['seed']} {r['family']} n={r['n']} delta={r['delta']}", r["lhs"] - r["rhs"], 0.0,
                r["lhs"] >= r["rhs"])
    if not tables["cells"].rows:
        v.check("cells present", 0, ">=1", False)
    return {"C11": v}


register(Experiment(
    name="sudakov",
    criteria=("C11",),
    description="mean width against the Sudakov lower bound from d_{n,2} covering numbers",
    defaults={
        "families": [
            {"label": "full_logistic", "family": {"id": "logistic", "args": {"a_lo": 4.0, "a_hi": 4.0}},
             "grid": {"x_points": 1_000_000, "x_grid": "conjugate"}, "optimizer": {"kind": "tracking"}},
            {"label": "rotation", "family": {"id": "rotation", "args": {"resolution": 256}},
             "grid": {"x_points": 256}, "optimizer": {"kind": "grid+refine", "theta_resolution": [2048, None], "x_points": 32}},
        ],
        "horizons": [10, 12, 14, 16, 18], "radii": [0.1, 0.2, 0.3], "noise": {"kind": "gaussian", "sigma": 1.0},
        "replicates": 64,
    },
    tables={"entropy": ENTROPY_COLS, "slopes": SLOPE_COLS, "cells": CELL_COLS, "sudakov_width": SMW_COLS},
    run_seed=_run_sudakov,
    prepare=_prepare_sudakov,
    verdicts=_verdict_sudakov,
    plot=(("cells", "n", "lhs", ("family", "delta")), ("cells", "n", "rhs", ("family", "delta"))),
))


# --------------------------------------------------------------------------
# auxiliary loss


ABS_COLS = ["seed", "diff", "sigma", "mc", "se", "closed", "z"]
SQ_COLS = ["seed", "diff", "sigma", "value", "closed"]


def folded_normal_mean(d: float, sigma: float) -> float:
    """``E|d - eps|`` for ``eps ~ N(0, sigma^2)``."""
    return sigma * math.sqrt(2.0 / math.pi) * math.exp(-d * d / (2.0 * sigma * sigma)) + d * math.erf(d / (sigma * math.sqrt(2.0)))


def _run_auxiliary(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    ab = Table("absolute", list(ABS_COLS))
    sq = Table("squared", list(SQ_COLS))
    for sigma in s["sigmas"]:
        noise = NoiseModel("gaussian", float(sigma))
        La = auxiliary_loss(LossSpec("absolute"), noise, s["mc_samples"], seed)
        Ls = auxiliary_loss(LossSpec("squared"), noise, s["mc_samples"], seed)
        for d in s["diffs"]:
            val, se = La.evaluate(float(d), 0.0)
            closed = folded_normal_mean(float(d), float(sigma))
            ab.add(seed=seed, diff=d, sigma=sigma, mc=float(val), se=float(se), closed=closed,
                   z=(float(val) - closed) / float(se))
            sq.add(seed=seed, diff=d, sigma=sigma, value=float(Ls(float(d), 0.0)), closed=float(d) ** 2 + float(sigma) ** 2)
    return {"absolute": ab, "squared": sq}


def _verdict_auxiliary(tables: dict, settings: dict) -> dict:
    v = Verdict("C7", True)
    for r in tables["absolute"].rows:
        v.check(f"seed {r['seed']} absolute d={r['diff']} sigma={r['sigma']}", abs(r["mc"] - r["closed"]),
                MC_SE * r["se"], abs(r["mc"] - r["closed"]) <= MC_SE * r["se"])
    for r in tables["squared"].rows:
        v.check(f"seed {r['seed']} squared d={r['diff']} sigma={r['sigma']}", r["value"], r["closed"],
                r["value"] == r["closed"])
    if not v.checks:
        v.check("rows present", 0, ">=1", False)
    return {"C7": v}


register(Experiment(
    name="auxiliary_loss",
    criteria=("C7",),
    description="Monte Carlo auxiliary loss against the folded-normal and squared closed forms",
    defaults={"diffs": [0.0, 0.25, 0.5, 1.0, 2.0], "sigmas": [0.5, 1.0], "mc_samples": 1_000_000},
    tables={"absolute": ABS_COLS, "squared": SQ_COLS},
    run_seed=_run_auxiliary,
    verdicts=_verdict_auxiliary,
    plot=(("absolute", "diff", "mc", ("sigma",)), ("absolute", "diff", "closed", ("sigma",))),
))


# --------------------------------------------------------------------------
# packing lemma


PACK_COLS = ["seed", "n", "delta", "p", "sets", "probes", "max_M", "bound", "violations"]


def _run_packing(ctx: Context, seed: int, index: int, shared: dict) -> dict:
    s = ctx.settings
    K = float(s["K"])
    t = Table("packing", list(PACK_COLS))
    for n in s["ns"]:
        for delta in s["deltas"]:
            for p in s["ps"]:
                rng = seeding.stream(seed, f"packing_lemma/{n}/{delta}/{p}", index)
                max_m, viol, bound = 0, 0, math.nan
                for _ in range(s["probe_sets"]):
                    u = rng.uniform(-K, K, n)
                    probes = random_probe_set(u, delta, p, K, s["probes_per_set"], rng)
                    chk = packing_bound_check(u, delta, p, K, probes)
                    max_m = max(max_m, chk.M)
                    viol += int(not chk.passed)
                    bound = chk.bound
                t.add(seed=seed, n=n, delta=delta, p=p, sets=s["probe_sets"], probes=s["probes_per_set"],
                      max_M=max_m, bound=bound, violations=viol)
    return {"packing": t}


def _verdict_packing(tables: dict, settings: dict) -> dict:
    v = Verdict("C10", True)
    for r in tables["packing"].rows:
        v.check(f"seed {r['seed']} n={r['n']} delta={r['delta']} p={r['p']} violations", r["violations"], 0,
                r["violations"] == 0 and r["max_M"] <= r["bound"])
    if not tables["packing"].rows:
        v.check("rows present", 0, ">=1", False)
    return {"C10": v}


register(Experiment(
    name="packing_lemma",
    criteria=("C10",),
    description="greedy packings of random probe sets against the l2-linf packing bound",
    defaults={"ns": [8, 16, 32], "deltas": [0.3, 0.5], "ps": [1, 2], "K": 1.0, "probe_sets": 1000,
              "probes_per_set": 256},
    tables={"packing": PACK_COLS},
    run_seed=_run_packing,
    verdicts=_verdict_packing,
    plot=(("packing", "n", "max_M", ("delta", "p")),),
))


# --------------------------------------------------------------------------
# dispatch


TOP_LEVEL_KEYS = ("family", "noise", "horizons", "radii", "p", "replicates", "loss", "optimizer", "grid")


def resolve_settings(cfg: ExperimentConfig) -> dict:
    """Defaults, overridden by recognised top-level fields, then by ``params``."""
    exp = get_experiment(cfg.experiment)
    settings = copy.deepcopy(exp.defaults)
    allowed = set(exp.defaults)
    for key in TOP_LEVEL_KEYS:
        val = getattr(cfg, key)
        if val is None:
            continue
        if key in allowed:
            settings[key] = copy.deepcopy(val)
        elif key == "family" and "families" in allowed:
            settings["families"] = [{"label": val["id"], "family": copy.deepcopy(val), "grid": dict(cfg.grid or {}),
                                     "optimizer": dict(cfg.optimizer or {})}]
        elif key in ("grid", "optimizer") and "families" in allowed and cfg.family is not None:
            continue  # folded into the single family entry
        else:
            raise ConfigError(f"field {key!r} is not used by experiment {cfg.experiment}", (key,))
    check_params(cfg, allowed)
    settings.update(copy.deepcopy(cfg.params))
    return settings


def get_experiment(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}", ("experiment",)) from None


def _finish(exp: Experiment, tables: dict, settings: dict):
    """CSV round trip, then verdicts and aggregates from the parsed tables."""
    parsed = {n: t.roundtrip() for n, t in tables.items()}
    verdicts = exp.verdicts(parsed, settings)
    agg = exp.aggregate(parsed, settings) if exp.aggregate else {}
    return parsed, verdicts, agg


def compute_verdicts(name: str, tables: dict, settings: dict) -> dict:
    return get_experiment(name).verdicts(tables, settings)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RunReport:
    """Run every seed of ``cfg`` and assemble the report.

    A resource-budget error stops the run; the tables filled so far are kept
    and the report is marked partial.
    """
    exp = get_experiment(cfg.experiment)
    settings = resolve_settings(cfg)
    budget = cfg.budget or {}
    ctx = Context(cfg, settings, budget.get("max_cells", DEFAULT_MAX_CELLS), budget.get("max_evaluations"),
                  budget.get("max_lp_variables", MAX_LP_VARIABLES))
    tables = {n: Table(n, list(cols)) for n, cols in exp.tables.items()}
    notes = []
    partial = False
    seeds = list(cfg.seeds)
    try:
        shared = {}
        if exp.prepare is not None:
            out = exp.prepare(ctx)
            partial = bool(out.pop("_partial", False))
            shared = out
            for n, t in out.items():
                tables[n].rows.extend(t.rows)
        if exp.run_seed is not None:
            def job(args):
                i, s = args
                return exp.run_seed(ctx, s, i, shared)

            if threads > 1 and len(seeds) > 1:
                with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                    results = list(pool.map(job, enumerate(seeds)))
            else:
                results = [job(a) for a in enumerate(seeds)]
            for res in results:
                partial = partial or bool(res.pop("_partial", False))
                for n, t in res.items():
                    tables[n].rows.extend(t.rows)
    except ResourceBudgetError as exc:
        partial = True
        notes.append(f"budget exceeded: {exc}")
    if partial and not notes:
        notes.append("optimizer budget exhausted; mean-width values are lower bounds")
    parsed, verdicts, agg = _finish(exp, tables, settings)
    return RunReport(exp.name, cfg.to_dict(), seeds, parsed, agg, verdicts,
                     status="partial" if partial else "complete", notes=notes, plot=list(exp.plot))


__all__ = ["Experiment", "REGISTRY", "run_experiment", "resolve_settings", "get_experiment", "compute_verdicts",
           "folded_normal_mean"]
