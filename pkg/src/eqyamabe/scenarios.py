"""Scenario configs: builtin catalog, YAML/JSON loading and validation."""
from __future__ import annotations

import copy
import difflib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .geom import ClosedModelMetric, RadialMetric
from .groups import FiniteGroupAction
from .topo import TopologyScenario

__all__ = [
    "ScenarioConfig",
    "BUILTINS",
    "list_scenarios",
    "builtin_config",
    "load_config",
    "parse_config",
    "resolve",
]

SOLVER_DEFAULTS = {
    "t_max": 5.0,
    "levels": 200,
    "tol": 1e-8,
    "flux_tol": 1e-6,
    "grid": 0,
    "grid_outer_radius": 16.0,
    "profile_dt": 0.05,
    "profile_t_max": 8.0,
    "r_max": 1e4,
    "n_theta": 32,
}
TOP_KEYS = ("name", "description", "model", "action", "topology", "action_summary", "solver", "output", "seed")
MODEL_KEYS = ("kind", "space", "p", "m", "r_min", "horizon", "a", "b", "blobs", "bumps", "r", "phi", "base_point")
ACTION_KEYS = ("label", "p", "q", "generators")
ACTION_LABELS = ("trivial", "antipodal", "lens", "rotation_pi", "matrices")
RADIAL_KINDS = ("flat", "schwarzschild", "potential", "tabulated")
SPACES = ("sphere", "projective", "lens")
SUMMARY_KEYS = ("min_card", "has_fixed_point", "is_sphere_manifold")


def _sphere_factor_topology():
    return {
        "name": "s2xs1-sphere-z2",
        "regions": ["E1", "B", "E2"],
        "exterior": ["E1", "E2"],
        "surfaces": {
            "S1": {"between": ["E1", "B"], "genus": 0, "horizon": True},
            "S2": {"between": ["B", "E2"], "genus": 0, "horizon": True},
            "C": {"between": ["B", "B"], "genus": 0, "horizon": False},
        },
        "generators": [{"regions": {"E1": "E2", "E2": "E1"}, "surfaces": {"S1": "S2", "S2": "S1"}}],
    }


def _circle_factor_topology():
    return {
        "name": "s2xs1-circle-z2",
        "regions": ["E1", "E2"],
        "exterior": ["E1", "E2"],
        "surfaces": {
            "Sa": {"between": ["E1", "E2"], "genus": 0, "horizon": True},
            "Sb": {"between": ["E1", "E2"], "genus": 0, "horizon": True},
        },
        "generators": [{"regions": {"E1": "E2", "E2": "E1"}, "surfaces": {"Sa": "Sb", "Sb": "Sa"}}],
    }


_FREE_Z2 = {"min_card": 2, "has_fixed_point": False, "is_sphere_manifold": False}

BUILTINS: Dict[str, Dict[str, Any]] = {
    "schwarzschild": {
        "description": "spatial Schwarzschild end of mass m (default 2); monotonicity equality case",
        "model": {"kind": "schwarzschild", "m": 2.0},
    },
    "rp3-model": {
        "description": "round RP^3 blown up at one point; model Rayleigh quotient",
        "model": {"kind": "closed", "space": "projective"},
        "action": {"label": "trivial"},
    },
    "antipodal-s3": {
        "description": "round S^3 with the antipodal Z_2 action; two ends sharing one horizon",
        "model": {"kind": "closed", "space": "sphere"},
        "action": {"label": "antipodal"},
        "topology": "auto",
    },
    "lens": {
        "description": "round S^3 with the free Z_p lens action (default p=3); p ends",
        "model": {"kind": "closed", "space": "sphere"},
        "action": {"label": "lens", "p": 3, "q": 1},
        "topology": "auto",
    },
    "s2xs1-sphere-z2": {
        "description": "S^2 x S^1 with Z_2 on the S^2 factor; separating horizons",
        "topology": _sphere_factor_topology(),
        "action_summary": dict(_FREE_Z2),
    },
    "s2xs1-circle-z2": {
        "description": "S^2 x S^1 with Z_2 on the S^1 factor; non-separating horizons",
        "topology": _circle_factor_topology(),
        "action_summary": dict(_FREE_Z2),
    },
    "flat-r3": {
        "description": "flat R^3 outside the unit ball; W is constant 4 pi",
        "model": {"kind": "flat", "r_min": 1.0},
    },
    "custom": {
        "description": "template: tabulated radial end (Schwarzschild m=1 samples)",
        "model": {
            "kind": "tabulated",
            "r": [float(x) for x in np.geomspace(0.5, 1e4, 96)],
            "phi": [float(1.0 + 0.5 / x) for x in np.geomspace(0.5, 1e4, 96)],
            "horizon": 0.5,
        },
    },
}

_PARAM_ALIASES = {"schwarzschild": "m", "lens": "p"}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    description: str = ""
    model: Optional[dict] = None
    action: Optional[dict] = None
    topology: Any = None
    action_summary: Optional[dict] = None
    solver: Dict[str, Any] = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    output: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        out = {"name": self.name, "description": self.description, "solver": dict(self.solver), "seed": self.seed}
        for key in ("model", "action", "topology", "action_summary", "output"):
            val = getattr(self, key)
            if val:
                out[key] = copy.deepcopy(val)
        return out

    def dumps(self, fmt: str = "yaml") -> str:
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2, sort_keys=True)
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def with_solver(self, **overrides) -> "ScenarioConfig":
        solver = dict(self.solver)
        solver.update({k: v for k, v in overrides.items() if v is not None})
        d = self.to_dict()
        d["solver"] = solver
        return parse_config(d)

    # builders used by the runner

    @property
    def is_closed(self) -> bool:
        return bool(self.model) and self.model.get("kind") == "closed"

    @property
    def is_radial(self) -> bool:
        return bool(self.model) and self.model.get("kind") in RADIAL_KINDS

    def closed_model(self) -> ClosedModelMetric:
        space = self.model.get("space", "sphere")
        if space == "sphere":
            return ClosedModelMetric.sphere()
        if space == "projective":
            return ClosedModelMetric.projective()
        return ClosedModelMetric.lens(int(self.model["p"]))

    def radial_end(self) -> RadialMetric:
        m = self.model
        kind = m["kind"]
        if kind == "flat":
            return RadialMetric.flat(float(m.get("r_min", 1.0)))
        if kind == "schwarzschild":
            return RadialMetric.schwarzschild(float(m.get("m", 2.0)))
        if kind == "potential":
            return RadialMetric.potential(
                float(m.get("a", 1.0)),
                float(m.get("b", 0.0)),
                blobs=tuple(tuple(x) for x in m.get("blobs", ())),
                bumps=tuple(tuple(x) for x in m.get("bumps", ())),
                r_min=float(m.get("r_min", 0.0)),
                horizon=m.get("horizon"),
            )
        return RadialMetric.tabulated(np.asarray(m["r"], float), np.asarray(m["phi"], float), horizon=m.get("horizon"), r_min=m.get("r_min"))

    def group_action(self) -> FiniteGroupAction:
        a = self.action or {"label": "trivial"}
        label = a.get("label", "trivial")
        if label == "trivial":
            return FiniteGroupAction.trivial()
        if label == "antipodal":
            return FiniteGroupAction.antipodal()
        if label == "lens":
            return FiniteGroupAction.lens(int(a.get("p", 3)), int(a.get("q", 1)))
        if label == "rotation_pi":
            return FiniteGroupAction.rotation_pi()
        return FiniteGroupAction.from_generators([np.asarray(g, float) for g in a["generators"]], label="matrices")

    def topology_scenario(self) -> Optional[TopologyScenario]:
        if isinstance(self.topology, dict):
            return TopologyScenario.from_dict(self.topology)
        return None


def list_scenarios() -> Dict[str, str]:
    return {name: spec["description"] for name, spec in BUILTINS.items()}


def _suggest(word, choices) -> str:
    close = difflib.get_close_matches(str(word), list(choices), n=1, cutoff=0.5)
    return f"; did you mean {close[0]!r}?" if close else ""


def builtin_config(name: str) -> ScenarioConfig:
    """Builtin by name; ``lens:p=5``, ``lens(5)`` and ``schwarzschild:m=1`` set the parameter."""
    m = re.fullmatch(r"\s*([A-Za-z0-9_\-]+?)\s*(?:[:(]\s*(?:([a-z]+)\s*=\s*)?([^)]*?)\s*\)?)?\s*", name)
    base, key, val = (m.group(1), m.group(2), m.group(3)) if m else (name, None, None)
    if base not in BUILTINS:
        raise ConfigError(f"unknown builtin {base!r}{_suggest(base, BUILTINS)}", "name")
    spec = copy.deepcopy(BUILTINS[base])
    d = {"name": base, **spec}
    if val:
        key = key or _PARAM_ALIASES.get(base)
        if key is None or key != _PARAM_ALIASES.get(base):
            raise ConfigError(f"builtin {base!r} takes no parameter {key!r}", "name")
        try:
            num = float(val)
        except ValueError:
            raise ConfigError(f"parameter {key} must be numeric, got {val!r}", "name") from None
        if base == "lens":
            if num != int(num):
                raise ConfigError("lens order must be an integer", "name")
            d["action"]["p"] = int(num)
        else:
            d["model"]["m"] = num
        d["name"] = f"{base}:{key}={val}"
    return parse_config(d)


def _line_map(text: str) -> Dict[Tuple, int]:
    """Map key paths to 1-based line numbers using the YAML node tree."""
    lines: Dict[Tuple, int] = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = path + (i,)
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    if root is not None:
        walk(root, ())
    return lines


def load_config(path) -> ScenarioConfig:
    """Load a YAML or JSON scenario file with line/field diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error: {exc.msg}", None, exc.lineno) from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", None, None if mark is None else mark.line + 1) from None
    return parse_config(data, _line_map(text))


def _err(msg, path, lines):
    fld = ".".join(str(p) for p in path) if path else None
    line = None
    for k in range(len(path), 0, -1):
        if tuple(path[:k]) in lines:
            line = lines[tuple(path[:k])]
            break
    raise ConfigError(msg, fld, line)


def _check_keys(d, allowed, path, lines):
    if not isinstance(d, dict):
        _err(f"{'.'.join(map(str, path)) or 'config'} must be a mapping", path, lines)
    for k in d:
        if k not in allowed:
            _err(f"unknown key {k!r}{_suggest(k, allowed)}", path + (k,), lines)


def _positive(d, key, path, lines, integer=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _err(f"{key} must be a number", path + (key,), lines)
    if integer and int(v) != v:
        _err(f"{key} must be an integer", path + (key,), lines)
    if not v > 0:
        _err(f"{key} must be positive", path + (key,), lines)


def parse_config(data: Any, lines: Optional[Dict[Tuple, int]] = None) -> ScenarioConfig:
    """Validate a config mapping; a string is resolved as a builtin name."""
    lines = lines or {}
    if isinstance(data, str):
        return builtin_config(data)
    _check_keys(data, TOP_KEYS, (), lines)
    if "name" not in data:
        _err("missing required key 'name'", ("name",), lines)
    name = str(data["name"])
    model = data.get("model")
    action = data.get("action")
    topology = data.get("topology")
    summary = data.get("action_summary")
    if model is None and topology is None:
        _err("config needs a model, a topology, or both", ("model",), lines)

    if model is not None:
        _check_keys(model, MODEL_KEYS, ("model",), lines)
        kind = model.get("kind")
        if kind not in ("closed",) + RADIAL_KINDS:
            _err(f"unknown model kind {kind!r}{_suggest(kind, ('closed',) + RADIAL_KINDS)}", ("model", "kind"), lines)
        if kind == "closed":
            space = model.get("space", "sphere")
            if space not in SPACES:
                _err(f"unknown space {space!r}{_suggest(space, SPACES)}", ("model", "space"), lines)
            if space == "lens":
                if "p" not in model:
                    _err("lens space needs p", ("model", "p"), lines)
                _positive(model, "p", ("model",), lines, integer=True)
        elif kind == "schwarzschild" and "m" in model:
            _positive(model, "m", ("model",), lines)
        elif kind == "tabulated":
            for key in ("r", "phi"):
                if key not in model:
                    _err(f"tabulated model needs {key!r}", ("model", key), lines)
            if len(model["r"]) != len(model["phi"]) or len(model["r"]) < 4:
                _err("r and phi must have equal length >= 4", ("model", "phi"), lines)
        for key in ("r_min", "horizon"):
            if model.get(key) is not None:
                _positive(model, key, ("model",), lines)

    if action is not None:
        _check_keys(action, ACTION_KEYS, ("action",), lines)
        label = action.get("label", "trivial")
        if label not in ACTION_LABELS:
            _err(f"unknown action {label!r}{_suggest(label, ACTION_LABELS)}", ("action", "label"), lines)
        if label == "lens" and "p" in action:
            _positive(action, "p", ("action",), lines, integer=True)
        if label == "matrices":
            gens = action.get("generators")
            if not gens:
                _err("matrix action needs generators", ("action", "generators"), lines)
            for i, g in enumerate(gens):
                if np.shape(g) != (4, 4):
                    _err("generators must be 4x4 matrices", ("action", "generators", i), lines)
        if model is None or model.get("kind") != "closed":
            _err("a group action needs a closed model", ("action",), lines)

    if topology is not None and topology != "auto":
        try:
            TopologyScenario.from_dict(topology)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            _err(f"malformed topology: {exc}", ("topology",), lines)
        except DomainError as exc:
            _err(f"invalid topology: {exc}", ("topology",), lines)
        if summary is None and action is None:
            _err("explicit topology needs action_summary or an action", ("action_summary",), lines)
    if topology == "auto" and (model is None or model.get("kind") != "closed"):
        _err("topology 'auto' needs a closed model", ("topology",), lines)
    if summary is not None:
        _check_keys(summary, SUMMARY_KEYS, ("action_summary",), lines)
        if "min_card" not in summary:
            _err("action_summary needs min_card", ("action_summary", "min_card"), lines)

    solver = dict(SOLVER_DEFAULTS)
    given = data.get("solver") or {}
    _check_keys(given, tuple(SOLVER_DEFAULTS), ("solver",), lines)
    solver.update(given)
    for key in ("t_max", "tol", "flux_tol", "profile_dt", "profile_t_max", "r_max", "grid_outer_radius"):
        _positive(solver, key, ("solver",), lines)
    for key in ("levels", "n_theta"):
        _positive(solver, key, ("solver",), lines, integer=True)
    solver["levels"] = int(solver["levels"])
    solver["n_theta"] = int(solver["n_theta"])
    g = solver["grid"]
    if isinstance(g, bool) or not isinstance(g, int) or g < 0 or (0 < g < 8):
        _err("grid must be 0 (off) or an integer >= 8", ("solver", "grid"), lines)
    output = data.get("output") or {}
    _check_keys(output, ("dir", "csv"), ("output",), lines)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _err("seed must be a non-negative integer", ("seed",), lines)
    try:
        if model is not None and action is not None:
            ScenarioConfig(name, model=model, action=action).group_action()
    except DomainError as exc:
        _err(f"invalid action: {exc}", ("action",), lines)
    return ScenarioConfig(
        name=name,
        description=str(data.get("description", "")),
        model=copy.deepcopy(model),
        action=copy.deepcopy(action),
        topology=copy.deepcopy(topology),
        action_summary=copy.deepcopy(summary),
        solver=solver,
        output=dict(output),
        seed=int(seed),
    )


def resolve(spec: str) -> ScenarioConfig:
    """A path to a config file, or a builtin name."""
    p = Path(spec)
    if p.exists():
        return load_config(p)
    return builtin_config(spec)
