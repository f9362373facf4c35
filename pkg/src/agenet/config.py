"""Run configuration files.

A run config is a JSON document with four top-level sections::

    {
      "train":  {"epochs": 200, "batch_size": 64, "learning_rate": 0.0005,
                 "seed": 0, "loss": "ecr", "attribute_guidance": true,
                 "alpha": 1.0, "beta": 1.0, "gamma": 1.0,
                 "preset": "desk", "crop": 64, "fuse_kernel": 3},
      "ages":   {"min": 16, "max": 77},
      "schema": "morph",                # or an inline schema object
      "data":   {"synthetic": {"resolution": 64, "noise_sigma": 0.02,
                               "seed": 0, "counts": [64, 16, 16],
                               "attr_correlation": 0.0}}
                # or {"manifest": "path/to/manifest.csv"}
    }

Unknown keys are rejected, and a manifest path must exist at parse time.
Every field except the data section has the default shown above.
"""

from __future__ import annotations

import json
from pathlib import Path

from .attributes import AttributeSchema, SCHEMAS
from .data import SyntheticSpec
from .ranking import LossKind
from .trainer import TrainConfig

__all__ = ["ConfigError", "load_run_config", "parse_run_config"]


class ConfigError(ValueError):
    """Config problem, annotated with the JSON key path."""


def _take(section: dict, path: str, known: dict) -> dict:
    unknown = set(section) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    out = dict(known)
    out.update(section)
    return out


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def parse_run_config(doc: dict, base_dir: Path | None = None) -> TrainConfig:
    base_dir = base_dir or Path(".")
    doc = _take(doc, "$", {"train": {}, "ages": {}, "schema": "morph", "data": None})
    _require(doc["data"] is not None, "$.data", "section is required")

    t = _take(doc["train"], "$.train", {
        "epochs": 200, "batch_size": 64, "learning_rate": 0.0005, "seed": 0,
        "loss": "ecr", "attribute_guidance": True,
        "alpha": 1.0, "beta": 1.0, "gamma": 1.0,
        "preset": "desk", "crop": 64, "fuse_kernel": 3,
    })
    try:
        loss_kind = LossKind(t["loss"])
    except ValueError:
        raise ConfigError(f"$.train.loss: unknown loss {t['loss']!r}, "
                          f"expected one of {[k.value for k in LossKind]}") from None

    ages = _take(doc["ages"], "$.ages", {"min": 16, "max": 77})
    _require(ages["min"] < ages["max"], "$.ages", "min must be below max")

    sch = doc["schema"]
    if isinstance(sch, str):
        _require(sch in SCHEMAS, "$.schema", f"unknown schema {sch!r}, have {sorted(SCHEMAS)}")
        schema_name, schema = sch, SCHEMAS[sch]
    else:
        s = _take(sch, "$.schema", {"gender_classes": 2, "ethnicity_classes": 4,
                                    "age_groups": None, "group_boundaries": None})
        _require(s["group_boundaries"] is not None, "$.schema.group_boundaries", "is required")
        if s["age_groups"] is None:
            s["age_groups"] = len(s["group_boundaries"])
        try:
            schema = AttributeSchema(s["gender_classes"], s["ethnicity_classes"],
                                     s["age_groups"], tuple(s["group_boundaries"]))
        except ValueError as exc:
            raise ConfigError(f"$.schema: {exc}") from None
        schema_name = "custom"

    data = _take(doc["data"], "$.data", {"synthetic": None, "manifest": None})
    _require((data["synthetic"] is None) != (data["manifest"] is None),
             "$.data", "exactly one of synthetic/manifest is required")
    synthetic = None
    manifest = None
    if data["synthetic"] is not None:
        s = _take(data["synthetic"], "$.data.synthetic", {
            "resolution": 64, "noise_sigma": 0.02, "seed": 0,
            "counts": [64, 16, 16], "attr_correlation": 0.0,
        })
        try:
            synthetic = SyntheticSpec(resolution=s["resolution"], a_min=ages["min"],
                                      a_max=ages["max"], noise_sigma=s["noise_sigma"],
                                      seed=s["seed"], counts=tuple(s["counts"]),
                                      attr_correlation=s["attr_correlation"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"$.data.synthetic: {exc}") from None
    else:
        manifest = str(base_dir / data["manifest"])
        _require(Path(manifest).is_file(), "$.data.manifest", f"file not found: {manifest}")

    try:
        return TrainConfig(
            epochs=t["epochs"], batch_size=t["batch_size"],
            learning_rate=t["learning_rate"], seed=t["seed"], loss_kind=loss_kind,
            attribute_guidance=t["attribute_guidance"],
            alpha=t["alpha"], beta=t["beta"], gamma=t["gamma"],
            preset=t["preset"], schema_name=schema_name, schema=schema,
            a_min=ages["min"], a_max=ages["max"], crop=t["crop"],
            fuse_kernel=t["fuse_kernel"], synthetic=synthetic, manifest=manifest,
        )
    except ValueError as exc:
        raise ConfigError(f"$.train: {exc}") from None


def load_run_config(path: str | Path) -> TrainConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_run_config(doc, base_dir=path.parent)
