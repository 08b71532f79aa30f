"""Run configuration: JSON schema, defaults and conversion to library objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from fracfueter.domain import Box4, make_box
from fracfueter.errors import ConfigError, FracFueterError
from fracfueter.frac1d import SingularQuadSpec, WeightFunction
from fracfueter.frac_fueter import FracQuad, WeightVector
from fracfueter.fueter import FieldFn, PolynomialField, constant_field, random_polynomial
from fracfueter.quaternion import PSI_STD, StructuralSet, validate_structural_set

CHECK_NAMES = (
    "quaternion-laws",
    "frac1d-selftest",
    "stokes",
    "borel-pompeiu",
    "prop1",
    "frac-stokes",
    "frac-bp",
    "cauchy-type",
    "hadamard",
    "second-order",
)

SWEEP_PARAMS = ("N_volume", "N_face", "node_count_1d", "fd_h", "epsilon")

_VEC4 = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_ORDER4 = {
    "type": "array",
    "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "minItems": 4,
    "maxItems": 4,
}
_WEIGHT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["identity", "log", "affine", "power"]},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}
_WEIGHTS = {
    "oneOf": [
        {"enum": ["identity", "log", "affine", "power"]},
        {"type": "array", "items": _WEIGHT, "minItems": 4, "maxItems": 4},
    ]
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fracfueter run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "box": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a", "b"],
            "properties": {"a": _VEC4, "b": _VEC4},
        },
        "structural_set": {
            "oneOf": [
                {"const": "std"},
                {"type": "array", "items": _VEC4, "minItems": 4, "maxItems": 4},
            ]
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"g": _WEIGHTS, "h": _WEIGHTS},
        },
        "orders": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"alpha": _ORDER4, "beta": _ORDER4},
        },
        "base_point": {"oneOf": [{"const": "center"}, _VEC4]},
        "test_function": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["constant", "linear", "polynomial"]},
                "degree": {"type": "integer", "minimum": 0, "maximum": 4},
                "seed": {"type": "integer", "minimum": 0},
                "value": _VEC4,
                "ttf": {"enum": ["zero", "family"]},
            },
        },
        "checks": {
            "type": "array",
            "items": {"enum": list(CHECK_NAMES)},
            "minItems": 1,
            "uniqueItems": True,
        },
        "resolution": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N_volume": {"type": "integer", "minimum": 2},
                "N_face": {"type": "integer", "minimum": 2},
                "node_count_1d": {"type": "integer", "minimum": 8},
                "fd_h": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "samples": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "points": {"type": "integer", "minimum": 1},
                "exterior_points": {"type": "integer", "minimum": 0},
                "pairs": {"type": "integer", "minimum": 1},
                "evaluations": {"type": "integer", "minimum": 1},
            },
        },
        "tolerances": {
            "type": "object",
            "propertyNames": {"enum": list(CHECK_NAMES)},
            "additionalProperties": {
                "oneOf": [
                    {"type": "number", "exclusiveMinimum": 0},
                    {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
                ]
            },
        },
    },
}

DEFAULTS: dict = {
    "box": {"a": [1.0, 1.0, 1.0, 1.0], "b": [2.0, 2.0, 2.0, 2.0]},
    "structural_set": "std",
    "weights": {"g": "identity", "h": "identity"},
    "orders": {"alpha": [0.5, 0.6, 0.7, 0.4], "beta": [0.6, 0.5, 0.4, 0.7]},
    "base_point": "center",
    "test_function": {"family": "polynomial", "degree": 2, "seed": 0, "value": [1.0, 0.0, 0.0, 0.0],
                      "ttf": "family"},
    "checks": list(CHECK_NAMES),
    "resolution": {"N_volume": 12, "N_face": 12, "node_count_1d": 256, "fd_h": 1e-3, "epsilon": None},
    "samples": {"seed": 0, "points": 2, "exterior_points": 1, "pairs": 5, "evaluations": 20},
    "tolerances": {},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _weight_vector(spec, box: Box4) -> WeightVector:
    if isinstance(spec, str):
        spec = [{"kind": spec}] * 4
    return WeightVector(tuple(
        WeightFunction.from_spec(s["kind"], box.a[k], box.b[k], **s.get("params", {}))
        for k, s in enumerate(spec)
    ))


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` is the fully merged JSON document."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        validate(data)
        merged = _merge(DEFAULTS, data)
        cfg = cls(merged)
        try:
            for prop in ("box", "psi", "g", "h", "base_point"):
                getattr(cfg, prop)
        except FracFueterError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def with_resolution(self, name: str, value) -> RunConfig:
        if name not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {name!r}; expected one of {', '.join(SWEEP_PARAMS)}")
        return RunConfig.from_dict(_merge(self.raw, {"resolution": {name: value}}))

    # library objects

    @property
    def checks(self) -> tuple[str, ...]:
        return tuple(self.raw["checks"])

    @property
    def box(self) -> Box4:
        return make_box(self.raw["box"]["a"], self.raw["box"]["b"])

    @property
    def psi(self) -> StructuralSet:
        s = self.raw["structural_set"]
        return PSI_STD if s == "std" else validate_structural_set(s)

    @property
    def g(self) -> WeightVector:
        return _weight_vector(self.raw["weights"]["g"], self.box)

    @property
    def h(self) -> WeightVector:
        return _weight_vector(self.raw["weights"]["h"], self.box)

    @property
    def alpha(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.raw["orders"]["alpha"])

    @property
    def beta(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.raw["orders"]["beta"])

    @property
    def base_point(self) -> np.ndarray:
        q = self.raw["base_point"]
        box = self.box
        if q == "center":
            return box.center
        q = np.asarray(q, dtype=float)
        if not box.contains(q, closed=False):
            raise ConfigError("base point must be strictly inside the box")
        return q

    @property
    def resolution(self) -> dict:
        return dict(self.raw["resolution"])

    @property
    def samples(self) -> dict:
        return dict(self.raw["samples"])

    @property
    def one_d(self) -> SingularQuadSpec:
        return SingularQuadSpec(node_count=self.resolution["node_count_1d"])

    @property
    def frac_quad(self) -> FracQuad:
        r = self.resolution
        return FracQuad(n_volume=r["N_volume"], n_face=r["N_face"], one_d=self.one_d)

    def fields(self, with_ttf: bool = False) -> tuple[FieldFn, Optional[FieldFn]]:
        """``(f, ttf)`` from the test-function family.

        ``ttf`` is ``None`` when the config asks for ``"zero"``, unless
        ``with_ttf`` forces the family member.
        """
        tf = self.raw["test_function"]
        family, seed = tf["family"], tf["seed"]
        if family == "constant":
            f = constant_field(tf["value"])
            ttf = constant_field(np.roll(tf["value"], 1))
        else:
            degree = 1 if family == "linear" else tf["degree"]
            f = random_polynomial(degree, seed).field()
            ttf = random_polynomial(degree, seed + 1).field()
        return f, (ttf if with_ttf or tf["ttf"] == "family" else None)

    def polynomial(self, degree: int, offset: int = 0) -> PolynomialField:
        return random_polynomial(degree, self.raw["test_function"]["seed"] + offset)

    def tolerance(self, check: str, key: str, default: float) -> float:
        tol = self.raw["tolerances"].get(check)
        if tol is None:
            return default
        if isinstance(tol, dict):
            return float(tol.get(key, default))
        return float(tol)

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True)


def validate(data: Any) -> None:
    """Schema check only; raises :class:`ConfigError` with the offending path."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    box = data.get("box")
    if box is not None and not all(lo < hi for lo, hi in zip(box["a"], box["b"])):
        raise ConfigError("box: every a_k must be smaller than b_k")


def default_config() -> RunConfig:
    return RunConfig.from_dict({})


def schema_json() -> str:
    return json.dumps(SCHEMA, indent=2) + "\n"
