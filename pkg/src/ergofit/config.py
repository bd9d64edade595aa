"""Experiment configuration: JSON files validated against a versioned schema."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import jsonschema

from .errors import ConfigError

SCHEMA_VERSION = 1

EXPERIMENTS = (
    "entropy_equality",
    "zero_entropy_families",
    "mean_width",
    "consistency_subcritical",
    "inconsistency_sigma",
    "distortion_lab",
    "sudakov",
    "auxiliary_loss",
    "packing_lemma",
)

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}

FAMILY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id"],
    "properties": {
        "id": {"type": "string", "enum": ["logistic", "rotation", "identity_vs_chaos", "substitution"]},
        "args": {"type": "object"},
    },
}

NOISE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["gaussian", "uniform", "rademacher"]},
        "sigma": {"type": "number", "minimum": 0},
        "half_width": {"type": "number", "exclusiveMinimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0},
    },
}

LOSS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["squared", "absolute", "bregman"]},
        "coeffs": {"type": "array", "items": _num},
        "offset": {"type": "number", "minimum": 0},
    },
}

OPTIMIZER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["grid", "grid+refine", "tracking"]},
        "theta_resolution": {"type": ["array", "null"], "items": {"type": ["integer", "null"]}},
        "x_points": {"type": ["integer", "null"], "minimum": 1},
        "refine_rounds": {"type": "integer", "minimum": 0},
        "golden_iters": {"type": "integer", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_evaluations": {"type": ["integer", "null"], "minimum": 1},
        "window": {"type": "integer", "minimum": 2, "maximum": 20},
        "chunk_rows": {"type": "integer", "minimum": 1},
    },
}

GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "theta_resolution": {"type": ["array", "null"], "items": {"type": ["integer", "null"]}},
        "x_points": _pos_int,
        "x_grid": {"enum": ["uniform", "conjugate"]},
    },
}

BUDGET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_cells": _pos_int,
        "max_evaluations": _pos_int,
        "max_lp_variables": _pos_int,
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ergofit experiment config",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiment"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "family": FAMILY_SCHEMA,
        "noise": NOISE_SCHEMA,
        "horizons": {"type": "array", "items": _pos_int, "minItems": 1},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "p": {"type": "array", "items": {"oneOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]}, "minItems": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "replicates": _pos_int,
        "loss": LOSS_SCHEMA,
        "optimizer": OPTIMIZER_SCHEMA,
        "grid": GRID_SCHEMA,
        "output_dir": {"type": "string"},
        "budget": BUDGET_SCHEMA,
        "params": {"type": "object"},
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    family: dict | None = None
    noise: dict | None = None
    horizons: list | None = None
    radii: list | None = None
    p: list | None = None
    seeds: list = field(default_factory=lambda: [0])
    replicates: int | None = None
    loss: dict | None = None
    optimizer: dict | None = None
    grid: dict | None = None
    output_dir: str = "out"
    budget: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d = {"schema_version": self.schema_version, "experiment": self.experiment}
        for key in ("family", "noise", "horizons", "radii", "p", "seeds", "replicates", "loss", "optimizer",
                    "grid", "output_dir", "budget", "params"):
            val = getattr(self, key)
            if val is not None and val != {}:
                d[key] = copy.deepcopy(val)
        return d

    def param(self, key, default=None):
        return self.params.get(key, default)


def _path(err: jsonschema.ValidationError) -> tuple:
    parts = list(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        parts += extra[:1]
    return tuple(parts)


def validate(raw: dict) -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = _path(err)
        where = "/".join(str(p) for p in path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {err.message}", path)
    return ExperimentConfig(**raw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return validate(raw)


def check_params(cfg: ExperimentConfig, allowed) -> None:
    """Reject experiment parameters this experiment does not know."""
    unknown = sorted(set(cfg.params) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown parameter {unknown[0]!r} for experiment {cfg.experiment}", ("params", unknown[0]))
