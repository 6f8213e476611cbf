"""JSON run configuration: schema validation and object builders."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ValidationError
from .field_grid import Grid, VectorField, read_field
from .initial_data import random_trig_field, vortex, vortices
from .signals import MatrixSignal, VectorSignal, precessing_axis

_SCALAR = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["constant", "sinusoid", "polynomial"]},
                "value": {"type": "number"},
                "mean": {"type": "number"},
                "amplitude": {"type": "number"},
                "frequency": {"type": "number"},
                "phase": {"type": "number"},
                "coeffs": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "additionalProperties": False,
        },
    ]
}

_NUM_ARRAY = {"type": "array", "items": {"type": "number"}}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dimension", "box", "signal_M"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "dimension": {"enum": [2, 3]},
        "box": {
            "type": "object",
            "required": ["L", "N"],
            "additionalProperties": False,
            "properties": {
                "L": {"type": "number", "exclusiveMinimum": 0},
                "N": {"type": "integer", "minimum": 8},
            },
        },
        "signal_M": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "constant", "rotation2d", "rotation3d", "sampled"]},
                "matrix": {"type": "array", "items": _NUM_ARRAY},
                "omega": {"$ref": "#/$defs/scalar"},
                "speed": {"$ref": "#/$defs/scalar"},
                "axis": {
                    "oneOf": [
                        {"type": "array", "items": {"$ref": "#/$defs/scalar"},
                         "minItems": 3, "maxItems": 3},
                        {"type": "object", "required": ["kind", "tilt", "rate"],
                         "additionalProperties": False,
                         "properties": {"kind": {"const": "precessing"}, "tilt": {"type": "number"},
                                        "rate": {"type": "number"}, "phase": {"type": "number"}}},
                    ]
                },
                "times": _NUM_ARRAY,
                "values": {"type": "array"},
                "order": {"enum": [1, 3]},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "signal_f": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "constant", "sinusoidal", "sampled"]},
                "vector": _NUM_ARRAY,
                "amplitude": _NUM_ARRAY,
                "frequency": {"type": "number"},
                "phase": {"type": "number"},
                "times": _NUM_ARRAY,
                "values": {"type": "array"},
                "order": {"enum": [1, 3]},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "times": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "s": {"type": "number", "minimum": 0},
                "t": {"type": "number", "minimum": 0},
                "t_list": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "T0": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "exponents": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": {"type": "number", "exclusiveMinimum": 1},
                "q": {"oneOf": [{"type": "number", "exclusiveMinimum": 1}, {"const": "inf"}]},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                           for k in ("flow", "check", "truncation", "picard")},
        },
        "data": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["vortex", "vortices", "trig", "scaled_vortex", "file"]},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "amplitude": {"type": "number"},
                "center": _NUM_ARRAY,
                "items": {"type": "array", "items": {
                    "type": "object", "required": ["sigma", "amplitude"],
                    "additionalProperties": False,
                    "properties": {"sigma": {"type": "number", "exclusiveMinimum": 0},
                                   "amplitude": {"type": "number"}, "center": _NUM_ARRAY}}},
                "n_modes": {"type": "integer", "minimum": 1},
                "kmax": {"type": "number", "exclusiveMinimum": 0},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "path": {"type": "string"},
            },
        },
        "kato": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_head": {"type": "integer", "minimum": 1},
                "n_tail": {"type": "integer", "minimum": 1},
                "n_quad": {"type": "integer", "minimum": 2},
                "max_iter": {"type": "integer", "minimum": 1},
                "refine": {"type": "boolean"},
                "nonlinear": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
    "$defs": {"scalar": _SCALAR},
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = ["config"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate(doc: Any) -> None:
    """Raise :class:`ValidationError` listing every schema violation with its field path."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{_path(e)}: {e.message}" for e in errors]
        raise ValidationError("invalid configuration:\n  " + "\n  ".join(lines))


def parse(text: str, source: str = "<config>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    validate(doc)
    return doc


# ---------------------------------------------------------------------------
# builders


def matrix_signal(spec: dict, d: int) -> MatrixSignal:
    kind = spec["kind"]
    t_max = spec.get("t_max", 100.0)
    if kind == "zero":
        M = MatrixSignal.zero(d, t_max)
    elif kind == "constant":
        M = MatrixSignal.constant(spec["matrix"], t_max)
    elif kind == "rotation2d":
        M = MatrixSignal.rotation2d(spec.get("omega", 1.0), t_max)
    elif kind == "rotation3d":
        axis = spec.get("axis", [0.0, 0.0, 1.0])
        if isinstance(axis, dict):
            axis = precessing_axis(axis["tilt"], axis["rate"], axis.get("phase", 0.0))
        M = MatrixSignal.rotation3d(axis, spec.get("speed", 1.0), t_max)
    else:
        M = MatrixSignal.sampled(spec["times"], spec["values"], spec.get("order", 3))
    if M.d != d:
        raise ValidationError(f"config.signal_M: dimension {M.d} does not match dimension {d}")
    return M


def vector_signal(spec: dict | None, d: int) -> VectorSignal:
    if spec is None:
        return VectorSignal.zero(d)
    kind = spec["kind"]
    t_max = spec.get("t_max", 100.0)
    if kind == "zero":
        f = VectorSignal.zero(d, t_max)
    elif kind == "constant":
        f = VectorSignal.constant(spec["vector"], t_max)
    elif kind == "sinusoidal":
        f = VectorSignal.sinusoidal(spec["amplitude"], spec.get("frequency", 1.0),
                                    spec.get("phase", 0.0), t_max)
    else:
        f = VectorSignal.sampled(spec["times"], spec["values"], spec.get("order", 3))
    if f.d != d:
        raise ValidationError(f"config.signal_f: dimension {f.d} does not match dimension {d}")
    return f


@dataclass
class RunConfig:
    raw: dict
    name: str
    grid: Grid
    M: MatrixSignal
    f: VectorSignal
    times: dict
    p: float
    q: float
    tolerances: dict
    seed: int
    output_dir: Path
    kato: dict = field(default_factory=dict)
    base: Path = Path(".")

    @property
    def data_spec(self) -> dict:
        return self.raw.get("data", {"kind": "vortex", "sigma": 1.0})

    def data(self) -> VectorField:
        """Fixed initial data described by the ``data`` section."""
        spec = self.data_spec
        kind = spec["kind"]
        g = self.grid
        if kind == "vortex":
            return vortex(g, spec.get("sigma", 1.0), spec.get("amplitude", 1.0), spec.get("center"))
        if kind == "vortices":
            return vortices(g, [(it["sigma"], it["amplitude"], it.get("center"))
                                for it in spec["items"]])
        if kind == "trig":
            return random_trig_field(g, spec.get("sigma", 1.0), spec.get("n_modes", 4),
                                     spec.get("kmax", 2.0), self.seed)
        if kind == "file":
            u = read_field(self.base / spec["path"], solenoidal=True)
            if u.grid != g:
                raise ValidationError("config.data.path: field grid differs from config.box")
            return u
        raise ValidationError(f"config.data.kind: {kind!r} is a family, not a single field")


def build(doc: dict, base: Path | str = ".") -> RunConfig:
    d = doc["dimension"]
    try:
        grid = Grid(d, float(doc["box"]["L"]), int(doc["box"]["N"]))
    except ValidationError as e:
        raise ValidationError(f"config.box: {e}") from None
    M = matrix_signal(doc["signal_M"], d)
    f = vector_signal(doc.get("signal_f"), d)
    ex = doc.get("exponents", {})
    q = ex.get("q", 2.0)
    q = math.inf if q == "inf" else float(q)
    times = dict(doc.get("times", {}))
    if "t_list" in times and np.any(np.diff(times["t_list"]) <= 0):
        raise ValidationError("config.times.t_list: must increase strictly")
    return RunConfig(
        raw=doc, name=doc.get("name", "run"), grid=grid, M=M, f=f, times=times,
        p=float(ex.get("p", 2.0)), q=q, tolerances=dict(doc.get("tolerances", {})),
        seed=int(doc.get("seed", 0)), output_dir=Path(doc.get("output_dir", "ouflow_out")),
        kato=dict(doc.get("kato", {})), base=Path(base),
    )


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e.strerror}") from None
    return build(parse(text, str(path)), path.parent)


CANNED = ("heat", "rotation", "precessing")


def canned(name: str) -> RunConfig:
    """One of the shipped verification configurations."""
    if name not in CANNED:
        raise ValidationError(f"unknown canned config {name!r}; choose from {', '.join(CANNED)}")
    text = resources.files("ouflow").joinpath("configs", f"{name}.json").read_text()
    return build(parse(text, f"{name}.json"))
