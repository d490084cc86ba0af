"""Scenario files: YAML with an explicit schema version, validated with line numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .coboundary import DetectorConfig
from .cocycle import CocycleSpec, spec_from_block
from .crossed import CPElement
from .states import MeasureError, MeasureSpec
from .torus import RotationNumber

SCHEMA_VERSION = 1
TASKS = ("classify", "coboundary", "average", "states", "conjugacy")
NAMED_ANGLES = {
    "golden": RotationNumber.golden,
    "silver": RotationNumber.silver,
    "sqrt3_minus_1": RotationNumber.sqrt3_minus_1,
    "liouville": RotationNumber.liouville,
}
COCYCLE_KINDS = ("character", "trigpoly", "constant", "lacunary")
TOP_KEYS = {
    "schema_version", "name", "rotation", "alpha", "cocycle", "solver", "scan",
    "windows", "average", "tasks", "measures", "conjugacy", "checks", "outputs",
}


class SchemaError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str
    line: int | None = None

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.path}: {self.message}"


def _line_map(text: str) -> dict[str, int]:
    """Field path -> 1-based line number, from the composed YAML node tree."""
    out: dict[str, int] = {}

    def walk(node, path):
        out[path or "<root>"] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, f"{path}.{k.value}" if path else str(k.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, "")
    return out


def bundled_names() -> list[str]:
    pkg = resources.files("skewprod") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".yaml"))


def read_source(ref: str) -> tuple[str, str]:
    """Text and origin label of a scenario file path or bundled scenario name."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(), str(path)
    res = resources.files("skewprod") / "scenarios" / f"{ref}.yaml"
    if res.is_file():
        return res.read_text(), f"bundled:{ref}"
    raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")


@dataclass
class Scenario:
    name: str
    theta: RotationNumber
    alpha: RotationNumber
    spec: CocycleSpec
    cfg: DetectorConfig
    depth: int
    n_max: int
    windows: list[int]
    element: CPElement
    tasks: list[str]
    measures: list[MeasureSpec]
    other: CocycleSpec | None
    checks: dict[str, int]
    raw: dict[str, Any] = field(repr=False, default_factory=dict)


class _Checker:
    def __init__(self, lines: dict[str, int]):
        self.lines = lines
        self.diags: list[Diagnostic] = []

    def err(self, path: str, msg: str) -> None:
        line = self.lines.get(path)
        if line is None:
            # fall back to the nearest enclosing field
            p = path
            while line is None and p:
                p = p.rsplit(".", 1)[0] if "." in p else ""
                line = self.lines.get(p)
        self.diags.append(Diagnostic(path, msg, line))

    def number(self, block: dict, key: str, path: str, lo: float, hi: float, default, integer: bool = False):
        if key not in block:
            return default
        v = block[key]
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok:
            self.err(f"{path}.{key}", f"expected {'an integer' if integer else 'a number'}, got {v!r}")
            return default
        if not (lo <= v <= hi) or (isinstance(v, float) and not math.isfinite(v)):
            self.err(f"{path}.{key}", f"value {v} outside [{lo}, {hi}]")
            return default
        return v

    def mapping(self, data: dict, key: str, required: bool = False) -> dict | None:
        if key not in data:
            if required:
                self.err(key, "required field missing")
            return None
        if not isinstance(data[key], dict):
            self.err(key, "expected a mapping")
            return None
        return data[key]


def _angle(ch: _Checker, block, path: str) -> RotationNumber | None:
    if not isinstance(block, dict):
        ch.err(path, "expected a mapping with one of name / cf / value")
        return None
    keys = [k for k in ("name", "cf", "value") if k in block]
    if len(keys) != 1:
        ch.err(path, "give exactly one of name / cf / value")
        return None
    try:
        if "name" in block:
            if block["name"] not in NAMED_ANGLES:
                ch.err(f"{path}.name", f"unknown angle {block['name']!r}; known: {sorted(NAMED_ANGLES)}")
                return None
            return NAMED_ANGLES[block["name"]]()
        if "cf" in block:
            cf = block["cf"]
            if not isinstance(cf, list) or not cf or not all(isinstance(a, int) and not isinstance(a, bool) for a in cf):
                ch.err(f"{path}.cf", "expected a non-empty list of integers")
                return None
            if cf[0] != 0 or any(a < 1 for a in cf[1:]):
                ch.err(f"{path}.cf", "angles in (0, 1) need a0 = 0 and positive partial quotients")
                return None
            tail = block.get("tail")
            r = RotationNumber(tuple(cf), tail)
            if tail is None and len(cf) < 2:
                ch.err(f"{path}.cf", "a finite expansion needs at least one partial quotient")
                return None
            return r
        v = block["value"]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 < v < 1:
            ch.err(f"{path}.value", f"expected a number in (0, 1), got {v!r}")
            return None
        return RotationNumber.from_float(float(v))
    except (ValueError, TypeError) as exc:
        ch.err(path, str(exc))
        return None


def _cocycle(ch: _Checker, block, path: str, theta, alpha) -> CocycleSpec | None:
    if not isinstance(block, dict):
        ch.err(path, "expected a mapping")
        return None
    kind = block.get("kind")
    if kind not in COCYCLE_KINDS:
        ch.err(f"{path}.kind", f"expected one of {list(COCYCLE_KINDS)}, got {kind!r}")
        return None
    if kind == "trigpoly":
        for i, t in enumerate(block.get("phase_coeffs", [])):
            if not (isinstance(t, list) and len(t) == 3 and isinstance(t[0], int)):
                ch.err(f"{path}.phase_coeffs[{i}]", "expected [m, re, im]")
                return None
    if kind == "lacunary":
        law = block.get("law", {})
        if not isinstance(law, dict):
            ch.err(f"{path}.law", "expected a mapping")
            return None
        if not isinstance(theta, RotationNumber) or theta.finite:
            ch.err(f"{path}.law", "lacunary laws need a continued-fraction rotation with an infinite tail")
            return None
    if theta is None or alpha is None:
        return None
    try:
        spec = spec_from_block(block, theta, alpha)
    except (ValueError, TypeError, KeyError) as exc:
        ch.err(path, str(exc))
        return None
    return spec


def _element(ch: _Checker, data, path: str, alpha) -> CPElement | None:
    if data is None:
        return CPElement.V(alpha) if alpha is not None else None
    if not isinstance(data, list) or not data:
        ch.err(path, "expected a non-empty list of {n, coeffs}")
        return None
    for i, term in enumerate(data):
        if not isinstance(term, dict) or "n" not in term or "coeffs" not in term:
            ch.err(f"{path}[{i}]", "expected {n, coeffs}")
            return None
    if alpha is None:
        return None
    try:
        return CPElement.from_json(data, alpha)
    except (ValueError, TypeError, IndexError) as exc:
        ch.err(path, str(exc))
        return None


def _measure(ch: _Checker, block, path: str) -> MeasureSpec | None:
    if not isinstance(block, dict):
        ch.err(path, "expected a mapping")
        return None
    if block.get("kind") == "haar":
        return MeasureSpec.haar()
    atoms = block.get("atoms", [])
    moments = block.get("moments", [])
    try:
        mom = {int(k): complex(re, im) for k, re, im in moments}
        return MeasureSpec(tuple((t, w) for t, w in atoms), mom, name=str(block.get("name", "")))
    except MeasureError as exc:
        sub = exc.field.split("[")[0] if exc.field else ""
        idx = exc.field[len(sub):] if exc.field else ""
        ch.err(f"{path}.{sub}{idx}" if sub else path, str(exc))
    except (ValueError, TypeError) as exc:
        ch.err(path, f"malformed measure: {exc}")
    return None


def parse_scenario(text: str) -> Scenario:
    """Parse and validate; raises SchemaError carrying every diagnostic found."""
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError([Diagnostic("<root>", f"YAML syntax: {exc}", mark.line + 1 if mark else None)]) from None
    ch = _Checker(lines)
    if not isinstance(data, dict):
        raise SchemaError([Diagnostic("<root>", "scenario must be a mapping")])

    ver = data.get("schema_version")
    if ver != SCHEMA_VERSION:
        ch.err("schema_version", f"expected {SCHEMA_VERSION}, got {ver!r}")
    for k in data:
        if k not in TOP_KEYS:
            ch.err(str(k), "unknown field")
    name = data.get("name", "scenario")
    if not isinstance(name, str) or not name:
        ch.err("name", "expected a non-empty string")
        name = "scenario"

    theta = None
    if "rotation" in data:
        theta = _angle(ch, data["rotation"], "rotation")
    else:
        ch.err("rotation", "required field missing")
    alpha = _angle(ch, data.get("alpha", {"name": "golden"}), "alpha")
    spec = None
    if "cocycle" in data:
        spec = _cocycle(ch, data["cocycle"], "cocycle", theta, alpha)
    else:
        ch.err("cocycle", "required field missing")

    sol = ch.mapping(data, "solver") or {}
    band = ch.number(sol, "band", "solver", 1, 1024, 16, integer=True)
    cfg_kw = dict(
        band=band,
        iterations=ch.number(sol, "iterations", "solver", 1, 10**7, 100_000, integer=True),
        battery=ch.number(sol, "battery", "solver", 1, band, min(8, band), integer=True),
        tol=ch.number(sol, "tol", "solver", 1e-15, 1e-2, 1e-9),
        existence_threshold=ch.number(sol, "existence_threshold", "solver", 1e-6, 1.0, 0.5),
        winding_search=ch.number(sol, "winding_search", "solver", 1, 10**6, 10_000, integer=True),
        shift_iterations=ch.number(sol, "shift_iterations", "solver", 2, 10**5, 1024, integer=True),
        cauchy_threshold=ch.number(sol, "cauchy_threshold", "solver", 1e-6, 10.0, 0.5),
        max_band=ch.number(sol, "max_band", "solver", band, 2048, max(256, band), integer=True),
    )
    if "null_threshold" in sol:
        cfg_kw["null_threshold"] = ch.number(sol, "null_threshold", "solver", 1e-12, 1.0, None)
    depth = ch.number(sol, "depth", "solver", 3, 14, 12, integer=True)
    cfg = None
    try:
        cfg = DetectorConfig(**cfg_kw)
    except ValueError as exc:
        ch.err("solver", str(exc))

    scan = ch.mapping(data, "scan") or {}
    n_max = ch.number(scan, "n_max", "scan", 1, 64, 12, integer=True)

    windows = data.get("windows", [1, 2, 4, 8, 16, 32, 64, 128, 256])
    if not isinstance(windows, list) or not windows or not all(
        isinstance(w, int) and not isinstance(w, bool) and 1 <= w <= 100_000 for w in windows
    ):
        ch.err("windows", "expected a non-empty list of integers in [1, 100000]")
        windows = [1]

    avg = ch.mapping(data, "average") or {}
    element = _element(ch, avg.get("element"), "average.element", alpha)

    tasks = data.get("tasks", ["classify"])
    if not isinstance(tasks, list) or not tasks:
        ch.err("tasks", f"expected a non-empty list drawn from {list(TASKS)}")
        tasks = []
    for i, t in enumerate(tasks):
        if t not in TASKS:
            ch.err(f"tasks[{i}]", f"unknown task {t!r}; expected one of {list(TASKS)}")
    measures = []
    mdata = data.get("measures", [{"kind": "haar"}])
    if not isinstance(mdata, list):
        ch.err("measures", "expected a list")
        mdata = []
    for i, block in enumerate(mdata):
        m = _measure(ch, block, f"measures[{i}]")
        if m is not None:
            measures.append(m)
    other = None
    conj = ch.mapping(data, "conjugacy")
    if conj is not None:
        if "cocycle" not in conj:
            ch.err("conjugacy.cocycle", "required field missing")
        else:
            other = _cocycle(ch, conj["cocycle"], "conjugacy.cocycle", theta, alpha)
    if "conjugacy" in tasks and conj is None:
        ch.err("conjugacy", "the conjugacy task needs a conjugacy.cocycle block")
    chk = ch.mapping(data, "checks") or {}
    checks = {
        "box": ch.number(chk, "box", "checks", 1, 50, 5, integer=True),
        "samples": ch.number(chk, "samples", "checks", 1, 200, 10, integer=True),
        "powers": ch.number(chk, "powers", "checks", 1, 16, 4, integer=True),
    }
    if spec is not None and spec.is_analytic:
        for i, t in enumerate(tasks):
            if t in ("average", "states", "conjugacy"):
                ch.err(f"tasks[{i}]", f"task {t!r} needs a trigonometric cocycle, not a lacunary law")
    if ch.diags:
        raise SchemaError(ch.diags)
    return Scenario(name, theta, alpha, spec, cfg, depth, n_max, windows, element, tasks, measures, other, checks, data)


def load(ref: str) -> Scenario:
    text, _ = read_source(ref)
    return parse_scenario(text)


def validate(ref: str) -> list[Diagnostic]:
    text, _ = read_source(ref)
    try:
        parse_scenario(text)
    except SchemaError as exc:
        return exc.diagnostics
    return []
