"""Run-config parsing: defaults, strict keys, key-path error reporting."""

import json

import pytest

from agenet.config import ConfigError, load_run_config, parse_run_config
from agenet.ranking import LossKind

MINIMAL = {
    "data": {"synthetic": {"counts": [16, 8, 8], "resolution": 32}},
    "ages": {"min": 20, "max": 59},
    "schema": {"group_boundaries": [20, 40]},
    "train": {"crop": 32},
}


def test_minimal_config_with_defaults():
    cfg = parse_run_config(json.loads(json.dumps(MINIMAL)))
    assert cfg.epochs == 200
    assert cfg.batch_size == 64
    assert cfg.learning_rate == 0.0005
    assert cfg.loss_kind == LossKind.ECR
    assert cfg.attribute_guidance is True
    assert (cfg.alpha, cfg.beta, cfg.gamma) == (1.0, 1.0, 1.0)
    assert cfg.synthetic.counts == (16, 8, 8)
    assert cfg.synthetic.a_min == 20 and cfg.synthetic.a_max == 59
    assert cfg.schema.age_groups == 2


def test_named_schema():
    doc = dict(MINIMAL, schema="lap2016", ages={"min": 3, "max": 80})
    cfg = parse_run_config(doc)
    assert cfg.schema_name == "lap2016"
    assert cfg.schema.ethnicity_classes == 0


def test_unknown_top_level_key_reports_path():
    with pytest.raises(ConfigError, match=r"\$: unknown keys \['extra'\]"):
        parse_run_config(dict(MINIMAL, extra=1))


def test_unknown_train_key_reports_path():
    doc = dict(MINIMAL, train={"crop": 32, "momentum": 0.9})
    with pytest.raises(ConfigError, match=r"\$\.train: unknown keys \['momentum'\]"):
        parse_run_config(doc)


def test_unknown_synthetic_key_reports_path():
    doc = dict(MINIMAL, data={"synthetic": {"counts": [16, 8, 8], "size": 3}})
    with pytest.raises(ConfigError, match=r"\$\.data\.synthetic"):
        parse_run_config(doc)


def test_bad_loss_name():
    doc = dict(MINIMAL, train={"crop": 32, "loss": "mse"})
    with pytest.raises(ConfigError, match=r"\$\.train\.loss"):
        parse_run_config(doc)


def test_missing_data_section():
    doc = {k: v for k, v in MINIMAL.items() if k != "data"}
    with pytest.raises(ConfigError, match=r"\$\.data"):
        parse_run_config(doc)


def test_both_data_sources_rejected():
    doc = dict(MINIMAL, data={"synthetic": {"counts": [16, 8, 8]},
                              "manifest": "x.csv"})
    with pytest.raises(ConfigError, match="exactly one"):
        parse_run_config(doc)


def test_manifest_must_exist(tmp_path):
    doc = dict(MINIMAL, data={"manifest": "missing.csv"})
    with pytest.raises(ConfigError, match="not found"):
        parse_run_config(doc, base_dir=tmp_path)


def test_manifest_resolves_relative_to_config(tmp_path):
    man = tmp_path / "m.csv"
    man.write_text("path,age,gender,ethnicity\n")
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps(dict(MINIMAL, data={"manifest": "m.csv"})))
    cfg = load_run_config(cfg_file)
    assert cfg.manifest == str(man)


def test_inverted_ages_rejected():
    doc = dict(MINIMAL, ages={"min": 60, "max": 40})
    with pytest.raises(ConfigError, match=r"\$\.ages"):
        parse_run_config(doc)


def test_bad_schema_boundaries_rejected():
    doc = dict(MINIMAL, schema={"group_boundaries": [40, 20]})
    with pytest.raises(ConfigError, match=r"\$\.schema"):
        parse_run_config(doc)


def test_unknown_named_schema_rejected():
    doc = dict(MINIMAL, schema="imdbwiki")
    with pytest.raises(ConfigError, match=r"\$\.schema"):
        parse_run_config(doc)


def test_invalid_json_file_reported(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(p)


def test_missing_file_reported(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.json")
