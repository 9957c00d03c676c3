"""JSON experiment configs: schema, validation and construction of library objects."""

import json
import os
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .cutproject import Scheme, Window
from .errors import ConfigError, ModelSetError
from .lattice import DEFAULT_CAP, Grid, Region
from .montecarlo import SamplerSpec, default_flow_time
from .numfield import NumberField, OrderBasis, minkowski_lattice
from .transforms import TestFunction

_num = {"type": "number"}
_int = {"type": "integer"}
_vec = {"type": "array", "items": _num}

_region = {
    "oneOf": [
        {"type": "object", "required": ["kind", "lo", "hi"], "additionalProperties": False,
         "properties": {"kind": {"const": "box"}, "lo": _vec, "hi": _vec}},
        {"type": "object", "required": ["kind", "radius"], "additionalProperties": False,
         "properties": {"kind": {"const": "ball"}, "center": _vec, "radius": {"type": "number", "minimum": 0}}},
    ]
}

_window_leaf = [
    {"type": "object", "required": ["kind", "lo", "hi"], "additionalProperties": False,
     "properties": {"kind": {"const": "box"}, "lo": _vec, "hi": _vec}},
    {"type": "object", "required": ["kind", "center", "radius"], "additionalProperties": False,
     "properties": {"kind": {"const": "ball"}, "center": _vec, "radius": {"type": "number", "minimum": 0}}},
    {"type": "object", "required": ["kind", "vertices"], "additionalProperties": False,
     "properties": {"kind": {"const": "polygon"},
                    "vertices": {"type": "array", "items": _vec, "minItems": 3}}},
    {"type": "object", "required": ["kind"], "additionalProperties": False,
     "properties": {"kind": {"const": "whole"}}},
]

_window = {
    "oneOf": _window_leaf + [
        {"type": "object", "required": ["kind", "pieces"], "additionalProperties": False,
         "properties": {"kind": {"const": "union"},
                        "pieces": {"type": "array", "items": {"oneOf": _window_leaf[:3]}}}},
    ]
}

_function = {
    "oneOf": [
        {"type": "object", "required": ["kind", "radius"], "additionalProperties": False,
         "properties": {"kind": {"const": "ball"}, "radius": {"type": "number", "minimum": 0}, "center": _vec}},
        {"type": "object", "required": ["kind", "lo", "hi"], "additionalProperties": False,
         "properties": {"kind": {"const": "box"}, "lo": _vec, "hi": _vec}},
        {"type": "object", "required": ["kind", "half_width"], "additionalProperties": False,
         "properties": {"kind": {"const": "tent"}, "half_width": {"type": "number", "exclusiveMinimum": 0},
                        "center": _vec, "scale": _num}},
        {"type": "object", "required": ["kind"], "additionalProperties": False,
         "properties": {"kind": {"const": "zero"}}},
    ]
}

_matrix = {"type": "array", "items": _vec}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["scheme", "window"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "cap": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["linear", "affine"]},
        "scheme": {
            "type": "object",
            "required": ["d", "m"],
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 0},
                "phys": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "min_poly": {"type": "array", "items": _int, "minItems": 2},
                "order_basis": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
                "copies": {"type": "integer", "minimum": 1},
                "normalize": {"type": "boolean"},
                "basis": _matrix,
                "translation": _vec,
            },
            "oneOf": [{"required": ["min_poly"], "not": {"required": ["basis"]}},
                      {"required": ["basis"], "not": {"required": ["min_poly"]}}],
        },
        "window": _window,
        "experiments": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generate": {"type": "object", "required": ["region"], "additionalProperties": False,
                             "properties": {"region": _region}},
                "density": {"type": "object", "additionalProperties": False,
                            "properties": {"T": {"type": "number", "exclusiveMinimum": 0}}},
                "irreducible": {"type": "object", "additionalProperties": False,
                                "properties": {"probe_radius": {"type": "number", "exclusiveMinimum": 0},
                                               "gap_threshold": {"type": "number", "exclusiveMinimum": 0}}},
                "cf_dist": {
                    "type": "object", "required": ["perturbations"], "additionalProperties": False,
                    "properties": {
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "eps_floor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "resolution": {"type": "number", "exclusiveMinimum": 0},
                        "center_window": {"type": "boolean"},
                        "perturbations": {"type": "array", "minItems": 1, "items": {
                            "type": "object", "additionalProperties": False,
                            "properties": {"matrix": _matrix, "vector": _vec}}},
                    },
                },
                "transform": {"type": "object", "required": ["function"], "additionalProperties": False,
                              "properties": {"function": _function}},
                "sampler": {
                    "type": "object", "required": ["sample_count"], "additionalProperties": False,
                    "properties": {
                        "t": {"type": "number", "minimum": 0},
                        "sample_count": {"type": "integer", "minimum": 1},
                        "torus_randomize": {"type": "boolean"},
                        "omega_lo": _vec, "omega_hi": _vec,
                    },
                },
                "verify_siegel": {"type": "object", "required": ["function"], "additionalProperties": False,
                                  "properties": {"function": _function,
                                                 "z_max": {"type": "number", "exclusiveMinimum": 0}}},
                "verify_rogers": {
                    "type": "object", "required": ["radii"], "additionalProperties": False,
                    "properties": {
                        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                        "band": {"type": "number", "minimum": 1},
                        "excess_radius": {"type": "number", "exclusiveMinimum": 0},
                        "excess_max": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "count": {
                    "type": "object", "required": ["T"], "additionalProperties": False,
                    "properties": {
                        "family": {"enum": ["balls", "boxes"]},
                        "anchor": {"enum": ["corner", "centered"]},
                        "T": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                    },
                },
                "patches": {
                    "type": "object", "required": ["R", "T"], "additionalProperties": False,
                    "properties": {
                        "R": {"type": "number", "minimum": 0},
                        "T": {"type": "number", "exclusiveMinimum": 0},
                        "family": {"enum": ["balls", "boxes"]},
                    },
                },
                "boxdim": {
                    "type": "object", "required": ["scales"], "additionalProperties": False,
                    "properties": {
                        "scales": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 4},
                        "koch_iterations": {"type": "integer", "minimum": 0, "maximum": 8},
                    },
                },
            },
        },
    },
}

SHIPPED = ("fibonacci", "ammann-beenker", "control-zn")


def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


def validate(doc):
    """Raise :class:`ConfigError` (with a JSON pointer) on the first schema violation."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        raise ConfigError(err.message, _pointer(err.absolute_path))


def load(path):
    """Read a config file, or a shipped config by name (``fibonacci`` or ``fibonacci.json``)."""
    name = str(path).removesuffix(".json")
    if name in SHIPPED and not os.path.exists(path):
        text = resources.files("modelsets").joinpath("configs", f"{name}.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "") from exc
    validate(doc)
    return doc


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _check_len(vec, k, path):
    if len(vec) != k:
        raise ConfigError(f"expected {k} entries, got {len(vec)}", path)


def build_scheme(doc):
    s = doc["scheme"]
    d, m = s["d"], s["m"]
    try:
        scheme = Scheme(d, m, s.get("phys"))
    except ModelSetError as exc:
        raise ConfigError(str(exc), "/scheme/phys") from exc
    n = d + m
    if "basis" in s:
        basis = s["basis"]
        _check_len(basis, n, "/scheme/basis")
        for i, row in enumerate(basis):
            _check_len(row, n, f"/scheme/basis/{i}")
        # basis vectors are listed one per entry; Grid wants them as columns
        B = np.array(basis, dtype=np.float64).T
        t = np.array(s.get("translation", [0.0] * n), dtype=np.float64)
        _check_len(t, n, "/scheme/translation")
        try:
            grid = Grid(B, t)
        except ModelSetError as exc:
            raise ConfigError(str(exc), "/scheme/basis") from exc
        return scheme, grid
    try:
        field = NumberField(tuple(s["min_poly"]))
    except ModelSetError as exc:
        raise ConfigError(str(exc), "/scheme/min_poly") from exc
    try:
        order = OrderBasis(field, s["order_basis"]) if "order_basis" in s else OrderBasis.power_basis(field)
    except (ModelSetError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc), "/scheme/order_basis") from exc
    k = s.get("copies", 1)
    if field.degree * k != n:
        raise ConfigError(f"degree {field.degree} x copies {k} != d + m = {n}", "/scheme/copies")
    grid = minkowski_lattice(order, k, s.get("normalize", False))
    if "translation" in s:
        _check_len(s["translation"], n, "/scheme/translation")
        grid = grid.translated(np.array(s["translation"], dtype=np.float64))
    return scheme, grid


def _window_from(w, m, path):
    kind = w["kind"]
    if kind == "whole":
        if m != 0:
            raise ConfigError("'whole' window needs m = 0", path)
        return Window.whole()
    if m == 0:
        raise ConfigError("m = 0 schemes take the 'whole' window", path)
    if kind == "box":
        _check_len(w["lo"], m, path + "/lo")
        _check_len(w["hi"], m, path + "/hi")
        return Window.box(w["lo"], w["hi"])
    if kind == "ball":
        _check_len(w["center"], m, path + "/center")
        return Window.ball(w["center"], w["radius"])
    if kind == "polygon":
        if m != 2:
            raise ConfigError("polygon windows need m = 2", path)
        try:
            return Window.polygon(w["vertices"])
        except ModelSetError as exc:
            raise ConfigError(str(exc), path + "/vertices") from exc
    pieces = [_window_from(p, m, f"{path}/pieces/{i}") for i, p in enumerate(w["pieces"])]
    return Window.union(pieces, m)


def build_window(doc):
    return _window_from(doc["window"], doc["scheme"]["m"], "/window")


def build_region(spec, d, path):
    if spec["kind"] == "box":
        _check_len(spec["lo"], d, path + "/lo")
        _check_len(spec["hi"], d, path + "/hi")
        return Region.box(spec["lo"], spec["hi"])
    center = spec.get("center", [0.0] * d)
    _check_len(center, d, path + "/center")
    return Region.ball(center, spec["radius"])


def build_function(spec, d, path):
    for key in ("center", "lo", "hi"):
        if key in spec:
            _check_len(spec[key], d, f"{path}/{key}")
    return TestFunction.from_json(spec, d)


def experiment(doc, name):
    exps = doc.get("experiments", {})
    if name not in exps:
        raise ConfigError(f"config has no '{name}' experiment", f"/experiments/{name}")
    return exps[name]


def seed_of(doc, override=None):
    if override is not None:
        return int(override)
    if "seed" not in doc:
        raise ConfigError("a seed is required for stochastic experiments", "/seed")
    return int(doc["seed"])


def build_sampler(doc, seed, support_radius=None, cap=DEFAULT_CAP):
    """Sampler from ``/experiments/sampler``; a missing ``t`` falls back to
    :func:`default_flow_time` for ``support_radius`` (or 0 without one)."""
    s = experiment(doc, "sampler")
    d = doc["scheme"]["d"]
    t = s.get("t")
    if t is None:
        t = default_flow_time(support_radius, cap) if support_radius else 0.0
    try:
        return SamplerSpec(d, t, s["sample_count"], seed, s.get("torus_randomize", False),
                           s.get("omega_lo"), s.get("omega_hi"))
    except ValueError as exc:
        raise ConfigError(str(exc), "/experiments/sampler") from exc


@dataclass
class Setup:
    doc: dict
    scheme: Scheme
    grid: Grid
    window: Window
    mode: str
    cap: int


def setup(doc, cap=None, center=False):
    scheme, grid = build_scheme(doc)
    window = build_window(doc)
    if center and scheme.m:
        from .cutproject import center_window

        window, _ = center_window(window)
    cap = int(cap if cap is not None else doc.get("cap", DEFAULT_CAP))
    return Setup(doc, scheme, grid, window, doc.get("mode", "affine"), cap)
