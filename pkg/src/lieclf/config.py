"""JSON system configurations.

A configuration names the state dimension, the generators (plain component
lists or ``{"pieces": [{"guards": [...], "field": [...]}]}``), an optional
drift, the target, the CLF candidate, the degree ``k``, the sampling region
and numeric knobs. ``define`` holds reusable expressions; a definition with
``params`` is a function macro.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources

from .clf import Ball, DistanceToBall, MaxOfSmooth, Region, SignedDistance, SmoothExpr
from .errors import ConfigError, ParseError
from .expr import Piece, PiecewiseVectorFieldDef, VectorFieldDef
from .parser import Macro, parse_expr
from .system import LIPSCHITZ, SMOOTH, SystemDef

NUMERIC_DEFAULTS = {
    "samples": 10000,
    "seed": 0,
    "levels": 16,
    "eps_drift": 1e-9,
    "substeps": 32,
    "record_every": 8,
    "max_halvings": 40,
    "field_bound": 1.0,
    "eps_d": 0.05,
    "max_steps": 100000,
}

_TOP_KEYS = {"name", "description", "dim", "define", "generators", "drift", "target", "clf",
             "k", "smoothness", "region", "synthesis", "numerics", "probe"}


def _locate(text: str, needle) -> tuple:
    """Line and column (1-based) of the first JSON literal equal to ``needle``."""
    if text is None:
        return None, None
    lit = json.dumps(needle) if isinstance(needle, str) else f'"{needle}"'
    pos = text.find(lit)
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Collector:
    def __init__(self, text):
        self.text = text
        self.diags = []

    def add(self, msg, needle=None, offset=0):
        line, col = _locate(self.text, needle) if needle is not None else (None, None)
        if col is not None and offset:
            col += offset
        self.diags.append((msg, line, col))

    def expr(self, s, dim, macros, what):
        if not isinstance(s, str):
            self.add(f"{what}: expected an expression string, got {json.dumps(s)}")
            return None
        try:
            return parse_expr(s, dim, macros)
        except ParseError as exc:
            # column inside the string, shifted past the opening quote
            self.add(f"{what}: {exc.args[0]}", s, exc.column or 0)
            return None


def _vec(c, v, n, what):
    if not isinstance(v, list) or len(v) != n or not all(isinstance(a, (int, float)) for a in v):
        c.add(f"{what} must be a list of {n} numbers")
        return None
    return tuple(float(a) for a in v)


@dataclass
class SystemConfig:
    """Validated configuration; ``raw`` is the canonical JSON document."""

    raw: dict
    system: SystemDef
    target: object
    clf: object
    region: Region
    numerics: dict
    synthesis: dict

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def __eq__(self, other):
        return isinstance(other, SystemConfig) and self.raw == other.raw

    @property
    def name(self) -> str:
        return self.raw.get("name", "")

    def synthesis_setup(self):
        """``(target, clf)`` for synthesis, honouring a ``synthesis.target`` override."""
        return self.synthesis["target"], self.synthesis["clf"]


def _field(c, spec, dim, macros, what):
    if isinstance(spec, dict):
        pieces = spec.get("pieces")
        if not isinstance(pieces, list) or not pieces:
            c.add(f"{what}: piecewise field needs a nonempty 'pieces' list")
            return None
        out = []
        for j, p in enumerate(pieces):
            if not isinstance(p, dict) or "field" not in p:
                c.add(f"{what}, piece {j + 1}: expected {{'guards': [...], 'field': [...]}}")
                return None
            f = _field(c, p["field"], dim, macros, f"{what}, piece {j + 1}")
            guards = [c.expr(g, dim, macros, f"{what}, piece {j + 1} guard") for g in p.get("guards", [])]
            if f is None or any(g is None for g in guards):
                return None
            out.append(Piece(tuple(guards), f))
        return PiecewiseVectorFieldDef(dim, tuple(out))
    if not isinstance(spec, list):
        c.add(f"{what}: expected a list of component expressions")
        return None
    if len(spec) != dim:
        c.add(f"{what}: {len(spec)} components, dimension is {dim}")
        return None
    comps = [c.expr(s, dim, macros, f"{what}, component {i + 1}") for i, s in enumerate(spec)]
    if any(e is None for e in comps):
        return None
    return VectorFieldDef(dim, tuple(comps))


def _target(c, spec, dim, macros):
    if not isinstance(spec, dict):
        c.add("target must be an object")
        return None
    kind = spec.get("type", "ball")
    if kind == "ball":
        ctr = _vec(c, spec.get("center", [0.0] * dim), dim, "target center")
        r = spec.get("radius", 0.0)
        if not isinstance(r, (int, float)) or r < 0:
            c.add("target radius must be a nonnegative number")
            return None
        return Ball(ctr, float(r)) if ctr is not None else None
    if kind == "signed_distance":
        e = c.expr(spec.get("expr"), dim, macros, "target expr")
        return SignedDistance(e, dim) if e is not None else None
    c.add(f"unknown target type {kind!r}", kind)
    return None


def _clf(c, spec, dim, macros, target):
    if not isinstance(spec, dict):
        c.add("clf must be an object")
        return None
    kind = spec.get("type", "distance")
    if kind == "distance":
        if "center" in spec:
            ctr = _vec(c, spec["center"], dim, "clf center")
            return DistanceToBall(ctr, float(spec.get("radius", 0.0))) if ctr else None
        if not isinstance(target, Ball):
            c.add("clf type 'distance' without a center needs a ball target")
            return None
        return DistanceToBall(target.center, target.radius)
    if kind == "expr":
        e = c.expr(spec.get("expr"), dim, macros, "clf expr")
        return SmoothExpr(e, dim) if e is not None else None
    if kind == "max":
        es = [c.expr(s, dim, macros, "clf exprs") for s in spec.get("exprs", [])]
        if not es or any(e is None for e in es):
            c.add("clf type 'max' needs a nonempty 'exprs' list")
            return None
        return MaxOfSmooth(tuple(es), dim, float(spec.get("tol", 1e-9)))
    c.add(f"unknown clf type {kind!r}", kind)
    return None


def _region(c, spec, dim):
    if not isinstance(spec, dict) or "u_max" not in spec:
        c.add("region must be an object with 'u_max'")
        return None
    box = spec.get("box")
    if box is not None:
        if not (isinstance(box, list) and len(box) == 2):
            c.add("region box must be [[lo...], [hi...]]")
            return None
        lo = _vec(c, box[0], dim, "region box lower corner")
        hi = _vec(c, box[1], dim, "region box upper corner")
        if lo is None or hi is None:
            return None
        box = (lo, hi)
    tubes = []
    for t in spec.get("tubes", []):
        if not (isinstance(t, list) and len(t) == 2 and isinstance(t[0], int) and 1 <= t[0] <= dim):
            c.add("region tubes are [axis (1-based), radius] pairs")
            return None
        tubes.append((t[0] - 1, float(t[1])))
    extra = []
    for p in spec.get("extra_points", []):
        v = _vec(c, p, dim, "region extra point")
        if v is None:
            return None
        extra.append(v)
    return Region(float(spec["u_max"]), float(spec.get("u_min", 0.0)), box, tuple(tubes), tuple(extra))


def _macros(c, spec):
    out = {}
    if not isinstance(spec, dict):
        c.add("define must be an object")
        return out
    for name, body in spec.items():
        if isinstance(body, str):
            out[name] = Macro((), body)
        elif isinstance(body, dict) and isinstance(body.get("body"), str):
            out[name] = Macro(tuple(body.get("params", [])), body["body"])
        else:
            c.add(f"definition of {name!r} must be a string or {{'params', 'body'}}", name)
    return out


def build_config(doc: dict, text: str | None = None) -> SystemConfig:
    """Validate a parsed JSON document; raises ConfigError listing every problem found."""
    c = _Collector(text)
    if not isinstance(doc, dict):
        raise ConfigError([("configuration must be a JSON object", 1, 1)])
    for key in doc:
        if key not in _TOP_KEYS:
            c.add(f"unknown key {key!r}", key)
    dim = doc.get("dim")
    if not isinstance(dim, int) or dim < 1:
        c.add("'dim' must be a positive integer", "dim")
        raise ConfigError(c.diags)
    macros = _macros(c, doc.get("define", {}))
    gens_spec = doc.get("generators")
    if not isinstance(gens_spec, list) or not gens_spec:
        c.add("at least one generator required", "generators")
        raise ConfigError(c.diags)
    gens = [_field(c, g, dim, macros, f"generator {i + 1}") for i, g in enumerate(gens_spec)]
    drift = None
    if doc.get("drift") is not None:
        drift = _field(c, doc["drift"], dim, macros, "drift")
        if isinstance(drift, PiecewiseVectorFieldDef):
            c.add("drift must be a plain vector field", "drift")
    k = doc.get("k", 1)
    smooth = doc.get("smoothness", SMOOTH)
    if smooth not in (SMOOTH, LIPSCHITZ):
        c.add(f"smoothness must be 'smooth' or 'lipschitz', got {smooth!r}", smooth)
    if not isinstance(k, int) or k < 1:
        c.add("'k' must be a positive integer", "k")
    elif smooth == LIPSCHITZ and k > 2:
        c.add("lipschitz systems support k <= 2", "k")
    elif drift is not None and k > 2:
        c.add("systems with drift support k <= 2", "k")
    num = dict(NUMERIC_DEFAULTS)
    for key, val in (doc.get("numerics") or {}).items():
        if key not in NUMERIC_DEFAULTS:
            c.add(f"unknown numerics key {key!r}", key)
        elif not isinstance(val, (int, float)) or isinstance(val, bool):
            c.add(f"numerics {key} must be a number", key)
        else:
            num[key] = type(NUMERIC_DEFAULTS[key])(val)
    target = _target(c, doc.get("target", {"type": "ball"}), dim, macros)
    clf = _clf(c, doc.get("clf", {"type": "distance"}), dim, macros, target)
    region = _region(c, doc.get("region", {}), dim)
    syn = dict(doc.get("synthesis") or {})
    s_target, s_clf = target, clf
    if "target" in syn:
        s_target = _target(c, syn["target"], dim, macros)
        s_clf = _clf(c, syn.get("clf", doc.get("clf", {"type": "distance"})), dim, macros, s_target)
    x0 = syn.get("x0")
    if x0 is not None:
        x0 = _vec(c, x0, dim, "synthesis x0")
    probe = doc.get("probe")
    if probe is not None:
        probe = _vec(c, probe, dim, "probe point")
    if c.diags:
        raise ConfigError(c.diags)
    try:
        sysd = SystemDef(dim, tuple(gens), drift, k, smooth, num["eps_drift"])
    except (ValueError, TypeError) as exc:
        raise ConfigError([(str(exc), None, None)]) from None
    synthesis = {"target": s_target, "clf": s_clf, "x0": x0,
                 "eps_d": float(syn.get("eps_d", num["eps_d"])), "probe": probe}
    return SystemConfig(copy.deepcopy(doc), sysd, target, clf, region, num, synthesis)


def parse_config(text: str) -> SystemConfig:
    """Parse JSON text; syntax and validation problems raise ConfigError with positions."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(exc.msg, exc.lineno, exc.colno)]) from None
    return build_config(doc, text)


def fixture_names() -> list:
    return sorted(p.name for p in resources.files("lieclf.fixtures").iterdir()
                  if p.name.endswith(".json"))


def fixture_text(name: str) -> str:
    if not name.endswith(".json"):
        name += ".json"
    return resources.files("lieclf.fixtures").joinpath(name).read_text(encoding="utf-8")


def load_fixture(name: str) -> SystemConfig:
    return parse_config(fixture_text(name))


def load_config(path: str) -> SystemConfig:
    """Read a config file; bare names of bundled fixtures are accepted too."""
    import os

    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    base = os.path.basename(path)
    if base in fixture_names() or base + ".json" in fixture_names():
        return load_fixture(base)
    raise ConfigError([(f"no such file: {path}", None, None)])
