"""Run configuration: JSON schema, overrides and scenario construction."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ConfigError
from .protocol import (PAPER_R, PAPER_VISIBILITY_AC, PAPER_VISIBILITY_BC, PAPER_FIDELITY_AB,
                       SampleSizes, SimulationScenario, ideal_scenario, physical_scenario)
from .states import PdlModel, StatePrepParams, visibility_for_fidelity

_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "trianglet run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "output_dir": {"type": "string"},
        "mi_log_base": {"enum": [2, 10, "e"]},
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["ideal", "physical", "paper_like"]},
                "theta": {"type": "number", "exclusiveMinimum": -90, "maximum": 90},
                "r": {"type": "number", "exclusiveMinimum": 0},
                "t_H": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "t_V": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "gamma_misalign_deg": {"type": "number", "exclusiveMinimum": -90, "exclusiveMaximum": 90},
                "visibility_AC": _PROB,
                "visibility_BC": _PROB,
                "visibility_AB": _PROB,
            },
        },
        "samples": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_ac": _POS_INT,
                "n_bc": _POS_INT,
                "n_tables": {"type": "array", "items": _POS_INT, "minItems": 4, "maxItems": 4},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps1_min": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "eps1_max": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "eps2_min": {"type": "number", "minimum": 1},
                "eps2_max": {"type": "number", "minimum": 1},
                "n_eps1": _POS_INT,
                "n_eps2": _POS_INT,
                "points": {"type": "array", "minItems": 1,
                           "items": {"type": "array", "items": {"type": "number"},
                                     "minItems": 2, "maxItems": 2}},
                "source": {"enum": ["events", "exact"]},
            },
        },
        "pvalue": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _POS_INT,
                "c": {"type": "integer", "minimum": 0},
                "beta_win": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps1": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "eps2": {"type": "number", "minimum": 1},
            },
        },
        "tomography": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "link": {"enum": ["AB", "AC", "BC"]},
                "shots_per_setting": _POS_INT,
                "bootstrap": {"type": "integer", "minimum": 0},
            },
        },
        "lhv_fuzz": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_models": {"type": "integer", "minimum": 0},
                "max_k": {"type": "integer", "minimum": 1, "maximum": 8},
                "include_adversarial": {"type": "boolean"},
            },
        },
        "misalign": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma_min": {"type": "number", "exclusiveMinimum": -90, "exclusiveMaximum": 90},
                "gamma_max": {"type": "number", "exclusiveMinimum": -90, "exclusiveMaximum": 90},
                "n_points": _POS_INT,
            },
        },
        "match": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"input_dir": {"type": "string"}},
        },
        # free-form metadata carried into the manifest untouched
        "annotations": {"type": "object"},
    },
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "output_dir": "out",
    "mi_log_base": 10,
    "scenario": {"kind": "ideal"},
    "samples": {},
    "grid": {"eps1_min": 1e-2, "eps1_max": 1.0, "eps2_min": 1.0, "eps2_max": 1e2,
             "n_eps1": 50, "n_eps2": 50, "source": "events"},
    "pvalue": {"eps1": 1.0, "eps2": 1.0},
    "tomography": {"link": "AB", "shots_per_setting": 100_000, "bootstrap": 100},
    "lhv_fuzz": {"n_models": 10_000, "max_k": 4, "include_adversarial": True},
    "misalign": {"gamma_min": -3.0, "gamma_max": 4.0, "n_points": 71},
    "match": {},
    "annotations": {},
}


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(doc: dict, assignment: str) -> None:
    """Apply ``dotted.key=value`` (value parsed as JSON when possible)."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} walks into a scalar")
    node[parts[-1]] = _parse_scalar(raw)


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None


def load_config(path, overrides=(), seed=None, output_dir=None) -> tuple[dict, str]:
    """Read, override, validate and default-fill a config; return it with its sha256.

    The hash covers the document after overrides and before defaults, minus
    ``output_dir``, so the same run written elsewhere hashes identically.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
        doc = json.loads(raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for item in overrides:
        apply_override(doc, item)
    if seed is not None:
        doc["seed"] = seed
    if output_dir is not None:
        doc["output_dir"] = str(output_dir)
    validate(doc)
    hashed = {k: v for k, v in doc.items() if k != "output_dir"}
    digest = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode("utf-8")).hexdigest()
    full = copy.deepcopy(DEFAULTS)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(full.get(key), dict):
            full[key].update(value)
        else:
            full[key] = value
    return full, digest


def build_scenario(cfg: dict) -> SimulationScenario:
    sc = cfg["scenario"]
    kind = sc.get("kind", "ideal")
    smp = cfg["samples"]
    base = SampleSizes()
    sizes = SampleSizes(smp.get("n_ac", base.n_ac), smp.get("n_bc", base.n_bc),
                        tuple(smp.get("n_tables", base.n_tables)))
    seed = cfg["seed"]
    if kind == "ideal":
        if set(sc) - {"kind", "theta"}:
            raise ConfigError("an ideal scenario takes theta only")
        return ideal_scenario(sc.get("theta"), sizes=sizes, seed=seed)

    gamma = sc.get("gamma_misalign_deg", 0.0)
    if "t_H" in sc or "t_V" in sc:
        if "t_H" not in sc or "t_V" not in sc:
            raise ConfigError("t_H and t_V must be given together")
        if "r" in sc or "theta" in sc:
            raise ConfigError("give either t_H/t_V or r/theta, not both")
        pdl = PdlModel(sc["t_H"], sc["t_V"], gamma)
    else:
        r, theta = sc.get("r"), sc.get("theta")
        if r is None and theta is None:
            r = PAPER_R if kind == "paper_like" else None
        if r is None and theta is None:
            raise ConfigError("a physical scenario needs r, theta or t_H/t_V")
        try:
            prep = StatePrepParams(r=r, theta=theta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        pdl = PdlModel.from_ratio(prep.resolved_r, gamma)

    if kind == "paper_like":
        v_ac = sc.get("visibility_AC", PAPER_VISIBILITY_AC)
        v_bc = sc.get("visibility_BC", PAPER_VISIBILITY_BC)
        v_ab = sc.get("visibility_AB", visibility_for_fidelity(PAPER_FIDELITY_AB))
    else:
        v_ac, v_bc, v_ab = (sc.get(k, 1.0) for k in ("visibility_AC", "visibility_BC", "visibility_AB"))
    return physical_scenario(pdl.r, v_ac, v_bc, v_ab, pdl=pdl, sizes=sizes, seed=seed)
