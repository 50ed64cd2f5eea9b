"""YAML plan and build-config loading with schema validation."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .errors import ValidationError
from .model import AnomalySpec, make_spiked
from .montecarlo import ExperimentPlan

_SPECTRUM = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

PLAN_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "l", "spectrum", "k"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "experiment": {"enum": ["moments", "power"]},
        "l": {"type": "integer", "minimum": 2},
        "spectrum": _SPECTRUM,
        "p": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "trials_per_phi": {"type": "integer", "minimum": 1},
        "phi_realizations": {"type": "integer", "minimum": 1},
        "master_seed": _SEED,
        "covariance_mode": {"enum": ["exact", "estimated"]},
        "n_train": {"type": "integer", "minimum": 1},
        "sampling_mode": {"enum": ["direct", "ambient"]},
        "eig_method": {"enum": ["auto", "full", "partial"]},
        "anomaly": {
            "type": "object",
            "additionalProperties": False,
            "required": ["d"],
            "properties": {"d": {"type": "integer", "minimum": 0}, "gamma": {"type": "number", "minimum": 0}},
        },
        "gamma_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "c_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 1}},
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"const": "power"}}},
         "then": {"required": ["gamma_grid", "c_grid"]},
         "else": {"required": ["p"]}},
        {"if": {"properties": {"covariance_mode": {"const": "estimated"}}, "required": ["covariance_mode"]},
         "then": {"required": ["n_train"]}},
    ],
}

BUILD_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["l", "p", "k", "seed", "covariance_mode"],
    "properties": {
        "l": {"type": "integer", "minimum": 2},
        "p": {"type": "integer", "minimum": 2},
        "k": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": _SEED,
        "spectrum": _SPECTRUM,
        "covariance_mode": {"enum": ["exact", "estimated"]},
        "training_data": {"type": "string"},
        "training_space": {"enum": ["compressed", "ambient"]},
    },
    "allOf": [
        {"if": {"properties": {"covariance_mode": {"const": "exact"}}},
         "then": {"required": ["spectrum"]},
         "else": {"required": ["training_data"]}},
    ],
}


@dataclass
class PlanSpec:
    """A parsed plan file: the experiment plan plus campaign-level fields."""

    kind: str
    plan: ExperimentPlan
    gamma_grid: list[float] | None = None
    c_grid: list[float] | None = None
    name: str | None = None


def _load_yaml(path: Path) -> Any:
    try:
        with open(path) as handle:
            return yaml.safe_load(handle)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}", code="UNREADABLE_FILE") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path} is not valid YAML: {exc}", code="CONFIG_SCHEMA") from exc


def validate_document(doc: Any, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"{what} field {where}: {exc.message}", code="CONFIG_SCHEMA") from exc


def shipped_plans() -> list[str]:
    folder = resources.files("compressed_pca") / "plans"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))


def resolve_plan_path(name_or_path: str) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    candidate = resources.files("compressed_pca") / "plans" / f"{name_or_path}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    raise ValidationError(
        f"no plan file or shipped plan named {name_or_path!r} (shipped: {', '.join(shipped_plans())})",
        code="UNREADABLE_FILE",
    )


def plan_from_dict(doc: dict) -> PlanSpec:
    validate_document(doc, PLAN_SCHEMA, "plan")
    model = make_spiked(doc["l"], doc["spectrum"])
    anomaly = None
    if "anomaly" in doc:
        anomaly = AnomalySpec(d=doc["anomaly"]["d"], gamma=doc["anomaly"].get("gamma", 0.0))
    kind = doc["experiment"]
    plan = ExperimentPlan(
        model=model,
        p=doc.get("p", doc["l"]),
        k=doc["k"],
        alpha=doc.get("alpha", 0.05),
        anomaly=anomaly,
        trials_per_phi=doc.get("trials_per_phi", 2000),
        phi_realizations=doc.get("phi_realizations", 30),
        master_seed=doc.get("master_seed", 0),
        covariance_mode=doc.get("covariance_mode", "exact"),
        n_train=doc.get("n_train"),
        sampling_mode=doc.get("sampling_mode", "direct"),
        eig_method=doc.get("eig_method", "auto"),
    )
    if kind == "moments":
        plan.validate()
    return PlanSpec(kind=kind, plan=plan, gamma_grid=doc.get("gamma_grid"), c_grid=doc.get("c_grid"), name=doc.get("name"))


def load_plan(name_or_path: str) -> PlanSpec:
    path = resolve_plan_path(name_or_path)
    doc = _load_yaml(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path} must contain a mapping", code="CONFIG_SCHEMA")
    return plan_from_dict(doc)


def load_build_config(path: str | Path) -> dict:
    doc = _load_yaml(Path(path))
    if not isinstance(doc, dict):
        raise ValidationError(f"{path} must contain a mapping", code="CONFIG_SCHEMA")
    validate_document(doc, BUILD_SCHEMA, "build config")
    return doc
