"""Problem files: TOML documents describing a structure, a curve or patch, one task and its settings.

Loading validates against :data:`SCHEMA` and reports every violation at
once.  ``key=value`` overrides address existing keys by dotted path.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import jsonschema

from . import lagexpr as lx
from .exterior import QuadratureSpec
from .finsler import FinslerStructure, lift_conventional
from .kawafield import ArealStructure, lift_field_conventional
from .kawafield2 import Areal2Structure
from .kawamech import KawaMechStructure, lift2_conventional
from .paths import Curve, Patch

__all__ = ["SCHEMA", "TASKS", "ProblemError", "Problem", "load_problem", "parse_problem", "apply_overrides"]

# which structure kinds each task accepts
TASKS = {
    "check-homogeneity": ("finsler", "kawamech", "areal", "areal2"),
    "length": ("finsler", "kawamech"),
    "area": ("areal", "areal2"),
    "el-residual": ("finsler", "kawamech", "areal"),
    "invariance-test": ("finsler", "kawamech", "areal", "areal2"),
    "noether": ("finsler", "kawamech", "areal"),
    "solve-bvp": ("finsler",),
    "lift-conventional": ("finsler", "kawamech", "areal"),
    "chart-test": ("finsler", "areal2"),
}

_NUM = {"type": "number"}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_EXPRS = {"type": "array", "items": {"type": ["string", "number"]}, "minItems": 1}
_CONSTANTS = {"type": "object", "additionalProperties": _NUM}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "varik problem file",
    "type": "object",
    "required": ["structure", "task"],
    "additionalProperties": False,
    "properties": {
        "structure": {
            "type": "object",
            "required": ["kind", "n"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["finsler", "kawamech", "areal", "areal2"]},
                "name": {"type": "string"},
                "n": {"type": "integer", "minimum": 1},
                "k": {"type": "integer", "minimum": 1},
                "expression": {"type": "string", "description": "density over the chart coordinates"},
                "conventional": {
                    "type": "string",
                    "description": "conventional Lagrangian over t, q, qd (, qdd) or t1.., q1.., q1d1..; lifted to a density",
                },
                "constants": _CONSTANTS,
                "scalar": {"enum": ["real", "complex"]},
                "labels": {"type": "array", "items": {"type": "string"}},
                "gauge": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "admissibility": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "box": {"type": "array", "items": _INTERVAL},
                        "exclusion": {"type": ["string", "null"]},
                    },
                },
            },
            "oneOf": [{"required": ["expression"]}, {"required": ["conventional"]}],
        },
        "curve": {
            "type": "object",
            "required": ["components", "interval"],
            "additionalProperties": False,
            "properties": {
                "components": _EXPRS,
                "interval": _INTERVAL,
                "param": {"type": "string"},
                "constants": _CONSTANTS,
            },
        },
        "patch": {
            "type": "object",
            "required": ["components", "rect"],
            "additionalProperties": False,
            "properties": {
                "components": _EXPRS,
                "rect": {"type": "array", "items": _INTERVAL, "minItems": 1},
                "params": {"type": "array", "items": {"type": "string"}},
                "constants": _CONSTANTS,
            },
        },
        "task": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"enum": sorted(TASKS)},
                "samples": {"type": "integer", "minimum": 1},
                "expected": {"type": "number"},
                "lambdas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "generator": _EXPRS,
                "reparam": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "domain": {"type": "array", "items": _INTERVAL, "minItems": 1},
                "map": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "rect": {"type": "array", "items": _INTERVAL, "minItems": 1},
                "start": {"type": "array", "items": _NUM, "minItems": 1},
                "end": {"type": "array", "items": _NUM, "minItems": 1},
                "gauge": {
                    "oneOf": [
                        {"type": "integer", "minimum": 0},
                        {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["index"],
                                "additionalProperties": False,
                                "properties": {
                                    "index": {"type": "integer", "minimum": 0},
                                    "power": {"type": "integer", "minimum": 1},
                                    "direction": {"enum": [-1, 0, 1]},
                                    "switch_slope": {"type": "number", "exclusiveMinimum": 0},
                                    "admissible_check": {"type": "number", "exclusiveMinimum": 0},
                                },
                            },
                        },
                    ]
                },
                "admissible_check": {"type": "number", "exclusiveMinimum": 0},
                "slope_guess": {"type": "array", "items": _NUM},
                "compare": {"enum": ["none", "cycloid"]},
                "y_pi": {"type": "number", "exclusiveMinimum": 0},
                "thresholds": {"type": "object", "additionalProperties": _NUM},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "quadrature": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "gauss_order": {"type": "integer", "minimum": 2},
                        "subdivisions": {"type": "integer", "minimum": 1},
                        "refine_rtol": {"type": "number", "exclusiveMinimum": 0},
                        "refine_atol": {"type": "number", "minimum": 0},
                        "max_levels": {"type": "integer", "minimum": 1},
                        "max_nodes": {"type": "integer", "minimum": 1},
                        "cross_check": {"type": "boolean"},
                    },
                },
                "sampling": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "count": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer", "minimum": 0},
                    },
                },
                "solver": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "rk4_steps": {"type": "integer", "minimum": 1},
                        "shoot_tol": {"type": "number", "exclusiveMinimum": 0},
                        "max_iters": {"type": "integer", "minimum": 1},
                        "verify_samples": {"type": "integer", "minimum": 2},
                        "verify_tol": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
                "grid": {"type": "integer", "minimum": 2},
                "include_timing": {"type": "boolean"},
            },
        },
    },
}


class ProblemError(ValueError):
    """A problem file that cannot be read, parsed or validated; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class Problem:
    data: dict
    source: str = "<string>"

    @property
    def kind(self) -> str:
        return self.data["structure"]["kind"]

    @property
    def task(self) -> dict:
        return self.data["task"]

    @property
    def task_name(self) -> str:
        return self.data["task"]["name"]

    def section(self, *path) -> dict:
        node = self.data
        for key in path:
            node = node.get(key, {})
        return node

    @property
    def output(self) -> dict:
        return self.section("output")

    @property
    def thresholds(self) -> dict:
        return dict(self.task.get("thresholds", {}))

    def quadrature(self) -> QuadratureSpec:
        q = {k: v for k, v in self.section("numerics", "quadrature").items() if k != "cross_check"}
        return QuadratureSpec(**q)

    @property
    def cross_check(self) -> bool:
        return bool(self.section("numerics", "quadrature").get("cross_check", True))

    @property
    def sampling(self) -> tuple:
        s = self.section("numerics", "sampling")
        return int(s.get("count", 200)), int(s.get("seed", 0))

    def structure(self):
        return build_structure(self.data["structure"])

    def curve(self) -> Curve:
        c = self.data["curve"]
        return Curve(c["components"], c["interval"], c.get("param", "t"), c.get("constants"), self._scalar())

    def patch(self) -> Patch:
        p = self.data["patch"]
        k = len(p["rect"])
        params = p.get("params", [f"t{a}" for a in range(1, k + 1)])
        return Patch(p["components"], p["rect"], params, p.get("constants"), self._scalar())

    def _scalar(self) -> str:
        return self.data["structure"].get("scalar", "real")


def _kw(st: dict) -> dict:
    kw = {}
    adm = st.get("admissibility", {})
    if "box" in adm:
        kw["box"] = tuple(tuple(b) for b in adm["box"])
    if "exclusion" in adm:
        kw["exclusion"] = adm["exclusion"]
    if "name" in st:
        kw["name"] = st["name"]
    return kw


def build_structure(st: dict):
    """The structure record described by a ``[structure]`` table."""
    kind, n = st["kind"], st["n"]
    env = dict(st.get("constants", {}))
    scalar = st.get("scalar", "real")
    labels = st.get("labels")
    kw = _kw(st)
    if kind in ("areal", "areal2"):
        k = st.get("k", 1)
        if kind == "areal" and "gauge" in st:
            kw["gauge"] = tuple(st["gauge"])
        if "conventional" in st:
            if kind != "areal":
                raise ProblemError(["structure: conventional Lagrangians lift only to finsler, kawamech and areal"])
            return lift_field_conventional(st["conventional"], k, n - k, env, scalar, **kw)
        cls = ArealStructure if kind == "areal" else Areal2Structure
        return cls.from_text(st["expression"], n, k, env, scalar, labels, **kw)
    if scalar != "real":
        raise ProblemError([f"structure: kind {kind} takes real densities only"])
    if kind == "finsler":
        if "conventional" in st:
            return lift_conventional(st["conventional"], n - 1, env, **kw)
        return FinslerStructure.from_text(st["expression"], n, env, labels, **kw)
    if "conventional" in st:
        return lift2_conventional(st["conventional"], n - 1, env, **kw)
    return KawaMechStructure.from_text(st["expression"], n, env, labels, **kw)


def _location(err) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def _semantic(data: dict) -> list:
    """Checks beyond the schema: task/kind compatibility and required sections."""
    errors = []
    st, task = data["structure"], data["task"]
    kind, name = st["kind"], task["name"]
    if kind not in TASKS[name]:
        errors.append(f"task: {name} is not available for structure kind {kind} (needs one of {', '.join(TASKS[name])})")
    if kind in ("areal", "areal2") and "k" not in st:
        errors.append(f"structure: kind {kind} needs k")
    if kind in ("areal", "areal2") and st.get("k", 1) > st["n"]:
        errors.append("structure: k must not exceed n")
    if kind in ("finsler", "kawamech") and "k" in st:
        errors.append(f"structure: k does not apply to kind {kind}")
    needs_curve = name in ("length", "el-residual", "invariance-test", "noether") and kind in ("finsler", "kawamech")
    needs_patch = name in ("area", "el-residual", "invariance-test", "noether") and kind in ("areal", "areal2")
    if needs_curve and "curve" not in data:
        errors.append(f"curve: task {name} needs a [curve] section")
    if needs_patch and "patch" not in data:
        errors.append(f"patch: task {name} needs a [patch] section")
    if name == "solve-bvp":
        for key in ("start", "end", "gauge"):
            if key not in task:
                errors.append(f"task: solve-bvp needs {key}")
    if name == "invariance-test" and "reparam" not in task:
        errors.append("task: invariance-test needs reparam")
    if name == "chart-test" and "map" not in task:
        errors.append("task: chart-test needs map")
    if name == "noether" and "generator" not in task:
        errors.append("task: noether needs generator")
    if name == "lift-conventional" and "conventional" not in st:
        errors.append("structure: lift-conventional needs a conventional Lagrangian")
    return errors


def validate(data: dict) -> None:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    msgs = [f"{_location(e)}: {e.message}" for e in errs]
    if not msgs:
        msgs = _semantic(data)
    if msgs:
        raise ProblemError(msgs)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _schema_has(parts: Sequence[str]) -> bool:
    node = SCHEMA
    for p in parts:
        props = node.get("properties", {})
        if p in props:
            node = props[p]
        elif isinstance(node.get("additionalProperties"), dict):
            node = node["additionalProperties"]
        else:
            return False
    return True


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Set dotted keys, e.g. ``numerics.solver.rk4_steps=500``.

    A key must be defined by the problem-file schema; missing tables on the
    way are created.  The result is validated like any problem file.
    """
    out = copy.deepcopy(data)
    errors = []
    for item in overrides:
        if "=" not in item:
            errors.append(f"override {item!r}: expected key=value")
            continue
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        if not all(parts) or not _schema_has(parts):
            errors.append(f"override {key!r}: not a problem-file key (see `varik schema`)")
            continue
        node = out
        for p in parts[:-1]:
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                errors.append(f"override {key!r}: {p} is not a table")
                break
            node = nxt
        else:
            node[parts[-1]] = _parse_value(text.strip())
    if errors:
        raise ProblemError(errors)
    return out


def parse_problem(text: str, source: str = "<string>", overrides: Sequence[str] = ()) -> Problem:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ProblemError([f"{source}: {exc}"]) from exc
    data = apply_overrides(data, overrides)
    validate(data)
    try:
        build_structure(data["structure"])
    except lx.ExprSyntaxError as exc:
        raise ProblemError([f"structure: {exc}"]) from exc
    except (lx.ExprError, ValueError) as exc:
        if isinstance(exc, ProblemError):
            raise
        raise ProblemError([f"structure: {exc}"]) from exc
    return Problem(data, source)


def load_problem(path, overrides: Sequence[str] = ()) -> Problem:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemError([f"{p}: {exc.strerror or exc}"]) from exc
    return parse_problem(text, str(p), overrides)


def read_builtin_text(name: str) -> Optional[str]:
    from importlib import resources

    res = resources.files("varik") / "problems" / f"{name}.toml"
    return res.read_text(encoding="utf-8") if res.is_file() else None
