import json

import pytest

from ergofit.config import EXPERIMENTS, ExperimentConfig, load_config, validate
from ergofit.errors import ConfigError
from ergofit.experiments import REGISTRY, resolve_settings


def raw(**kw):
    return {"schema_version": 1, "experiment": "auxiliary_loss", **kw}


def test_minimal_config_defaults():
    cfg = validate(raw())
    assert cfg.seeds == [0] and cfg.output_dir == "out"
    assert validate(cfg.to_dict()) == cfg


def test_registry_matches_schema_enum():
    assert set(REGISTRY) == set(EXPERIMENTS)


def test_unknown_top_level_key_reports_path():
    with pytest.raises(ConfigError) as e:
        validate(raw(sigma0_override=1.5))
    assert e.value.path == ("sigma0_override",)
    assert "sigma0_override" in str(e.value)


def test_nested_key_path():
    with pytest.raises(ConfigError) as e:
        validate(raw(noise={"kind": "gaussian", "sigmaa": 1.0}))
    assert e.value.path == ("noise", "sigmaa")
    with pytest.raises(ConfigError) as e:
        validate(raw(horizons=[10, 0]))
    assert e.value.path == ("horizons", 1)


@pytest.mark.parametrize("bad", [{"schema_version": 2, "experiment": "auxiliary_loss"}, {"schema_version": 1},
                                 raw(experiment="nope"), raw(p=[0.5]), raw(seeds=[-1])])
def test_schema_rejections(bad):
    with pytest.raises(ConfigError):
        validate(bad)


def test_unknown_param_and_unused_field():
    with pytest.raises(ConfigError) as e:
        resolve_settings(validate(raw(params={"sigma0_override": 2.0})))
    assert e.value.path == ("params", "sigma0_override")
    with pytest.raises(ConfigError) as e:
        resolve_settings(validate(raw(horizons=[8])))
    assert e.value.path == ("horizons",)


def test_single_family_folds_into_family_list():
    cfg = validate({"schema_version": 1, "experiment": "zero_entropy_families",
                    "family": {"id": "rotation", "args": {"resolution": 8}}, "grid": {"x_points": 8}})
    s = resolve_settings(cfg)
    assert len(s["families"]) == 1 and s["families"][0]["grid"] == {"x_points": 8}


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps(raw(seeds=[1, 2])))
    assert load_config(p) == ExperimentConfig("auxiliary_loss", seeds=[1, 2])
