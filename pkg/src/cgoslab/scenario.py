"""Scenario files: a JSON description of a slab, two potential pairs and the numerics."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .cgo import CgoNumerics
from .fieldio import read_pair
from .fields import PotentialPair, ScalarField, VectorField, gauge_transform, gradient
from .grid import Ball, Grid, SlabSpec
from .pairing import first_quadrant_grid, normalize_mode
from .potentials import bump, gauge_bump, make_pair, profile

__all__ = ["SCHEMA", "Scenario", "ScenarioError", "load_scenario", "scenario_hash", "build_pairs",
           "default_scenario"]


class ScenarioError(ValueError):
    """Schema violation or unresolvable scenario reference."""


_vec = {"type": "array", "items": {"type": "number"}, "minItems": 3}
_profile = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian", "indicator", "shell", "sqrt_edge", "bump", "multiscale", "zero"]},
        "center": _vec,
        "direction": _vec,
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "r_in": {"type": "number", "minimum": 0},
        "r_out": {"type": "number", "exclusiveMinimum": 0},
        "amplitude": {"type": "number"},
        "seed": {"type": "integer"},
    },
}
_profiles = {"oneOf": [_profile, {"type": "array", "items": _profile}]}
_bumpspec = {
    "type": "object",
    "required": ["center", "radius", "amplitude"],
    "properties": {"center": _vec, "radius": {"type": "number", "exclusiveMinimum": 0},
                   "amplitude": {"type": "number"}},
}
_pair = {
    "type": "object",
    "properties": {
        "file": {"type": "string"},
        "from": {"enum": ["p1"]},
        "A": _profiles,
        "q": _profiles,
        "boundary_flatness": {"type": "number", "minimum": 0},
        "gauge": _bumpspec,
        "curl_perturbation": _bumpspec,
        "A_add": _profiles,
        "q_add": _profiles,
    },
    "additionalProperties": False,
}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["slab", "potentials"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "mode": {"enum": ["t1", "t2", "theorem-1.1", "theorem-1.2"]},
        "slab": {
            "type": "object",
            "required": ["L", "R", "center", "radius"],
            "properties": {
                "L": {"type": "number", "exclusiveMinimum": 0},
                "R": {"type": "number", "exclusiveMinimum": 0},
                "center": _vec,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "dim": {"type": "integer", "minimum": 3},
                "margin": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "spacing": {"type": "number", "exclusiveMinimum": 0},
                "crop_to_ball": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "potentials": {
            "type": "object",
            "required": ["p1", "p2"],
            "properties": {"p1": _pair, "p2": _pair},
            "additionalProperties": False,
        },
        "numerics": {
            "type": "object",
            "properties": {
                "h_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "eps_coupling": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "k": {"type": "number"},
                "order": {"type": "number", "exclusiveMinimum": 0},
                "probe_points": {"type": "integer", "minimum": 1},
                "rel_floor": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "xi_grid": {
            "type": "object",
            "properties": {
                "points": {"type": "array", "items": _vec, "minItems": 1},
                "count": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
                "snapshots": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario with its source path and canonical hash."""

    data: dict
    path: Path | None = None
    hash: str = ""
    grid_scale: float = 1.0
    extra: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.data.get("name", self.path.stem if self.path else "scenario")

    @property
    def mode(self) -> str:
        return normalize_mode(self.data.get("mode", "t1"))

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    def slab(self) -> SlabSpec:
        s = self.data["slab"]
        return SlabSpec(L=s["L"], R=s["R"], center=tuple(s["center"]), radius=s["radius"],
                        dim=s.get("dim", len(s["center"])), margin=s.get("margin", 2.0))

    def grid(self) -> Grid:
        spec = self.slab()
        gs = self.data.get("grid", {})
        g = spec.grid_for_spacing(gs.get("spacing", 0.05) / self.grid_scale)
        return spec.ball_box(g) if gs.get("crop_to_ball", True) else g

    @property
    def h_list(self) -> tuple:
        return tuple(self.data.get("numerics", {}).get("h_list", (0.4, 0.2, 0.1, 0.05)))

    def numerics(self) -> CgoNumerics:
        n = self.data.get("numerics", {})
        return CgoNumerics(eps_coupling=n.get("eps_coupling", 1.0), rtol=n.get("rtol", 1e-10), k=n.get("k", 0.0))

    def option(self, key, default):
        return self.data.get("numerics", {}).get(key, default)

    def xi_grid(self) -> np.ndarray:
        x = self.data.get("xi_grid", {})
        if "points" in x:
            return np.asarray(x["points"], float)
        dim = self.slab().dim
        return first_quadrant_grid(x.get("count", 3), x.get("radius", 3.0), seed=x.get("seed", self.seed), dim=dim)

    def output_dir(self, override=None) -> Path:
        if override:
            return Path(override)
        d = self.data.get("outputs", {}).get("dir")
        if d:
            return Path(d) if Path(d).is_absolute() or self.path is None else self.path.parent / d
        return Path("out") / self.name

    def resolve(self, ref: str) -> Path:
        p = Path(ref)
        if not p.is_absolute() and self.path is not None:
            p = self.path.parent / p
        return p


def scenario_hash(data: dict) -> str:
    """SHA-256 of the canonical JSON encoding."""
    return hashlib.sha256(json.dumps(data, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _check(data: dict, path=None) -> None:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        where = "/".join(str(t) for t in e.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {e.message}")
    h = data.get("numerics", {}).get("h_list")
    if h is not None and any(b >= a for a, b in zip(h, h[1:])):
        raise ScenarioError("schema violation at numerics/h_list: must be strictly decreasing")
    for key in ("p1", "p2"):
        f = data["potentials"][key].get("file")
        if f is not None:
            fp = Path(f) if Path(f).is_absolute() or path is None else Path(path).parent / f
            if not fp.exists():
                raise ScenarioError(f"referenced file does not exist: {fp}")


def load_scenario(path=None, data: dict | None = None, grid_scale: float = 1.0) -> Scenario:
    """Read and validate a scenario from ``path`` (or a dict).

    Raises
    ------
    ScenarioError
        On malformed JSON, schema violations, non-decreasing ``h_list`` or
        missing referenced files; the message names the first problem.
    """
    if data is None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"malformed JSON: {exc}") from None
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("schema violation at <root>: scenario must be a JSON object")
    _check(data, path)
    if not grid_scale > 0:
        raise ScenarioError("grid scale must be positive")
    return Scenario(copy.deepcopy(data), None if path is None else Path(path), scenario_hash(data), grid_scale)


def _profiles_list(x):
    return [] if x is None else (x if isinstance(x, list) else [x])


def _build_one(spec: dict, grid: Grid, slab: SlabSpec, sc: Scenario, base: PotentialPair | None):
    if "file" in spec:
        p = read_pair(sc.resolve(spec["file"]))
        if p.grid != grid:
            p = p.restrict(grid) if grid.compatible(p.grid) else None
            if p is None:
                raise ScenarioError("field file grid does not match the scenario grid")
        return p
    if spec.get("from") == "p1":
        if base is None:
            raise ScenarioError("p1 cannot be derived from itself")
        p = base
    else:
        p = make_pair(grid, slab.ball, slab.L, _profiles_list(spec.get("A")) or None,
                      _profiles_list(spec.get("q")) or None,
                      boundary_flatness=spec.get("boundary_flatness", 0.0))
    if "gauge" in spec:
        g = spec["gauge"]
        p = gauge_transform(p, gauge_bump(grid, g["center"], g["radius"], g["amplitude"]), invariance=True)
    if "curl_perturbation" in spec:
        # the gradient of a bump rotated in the (x1, x2) plane: same norm, nonzero curl
        c = spec["curl_perturbation"]
        G = gradient(c["amplitude"] * bump(grid, c["center"], c["radius"]), grid.spacing)
        W = np.stack([-G[1], G[0]] + [G[j] for j in range(2, grid.ndim)])
        ball = Ball(tuple(c["center"]), c["radius"] + 2 * max(grid.spacing))
        p = p.with_fields(A=VectorField(grid, p.A.data + W), support=p.support + (ball,))
    if "A_add" in spec:
        extra = make_pair(grid, slab.ball, slab.L, _profiles_list(spec["A_add"]), None)
        p = p.with_fields(A=VectorField(grid, p.A.data + extra.A.data))
    if "q_add" in spec:
        dq = sum(profile(grid, s) for s in _profiles_list(spec["q_add"]))
        p = p.with_fields(q=ScalarField(grid, p.q.data + dq))
    return p


def build_pairs(sc: Scenario) -> tuple[PotentialPair, PotentialPair]:
    """Materialize both potential pairs on the scenario grid."""
    slab = sc.slab()
    grid = sc.grid()
    p1 = _build_one(sc.data["potentials"]["p1"], grid, slab, sc, None)
    p2 = _build_one(sc.data["potentials"]["p2"], grid, slab, sc, p1)
    return p1, p2


def default_scenario() -> Scenario:
    """Small built-in pair used by subcommands run without ``--scenario``."""
    data = {
        "name": "builtin",
        "seed": 0,
        "mode": "t1",
        "slab": {"L": 1.0, "R": 1.5, "center": [0.0, 0.0, 0.5], "radius": 0.45},
        "grid": {"spacing": 0.05},
        "potentials": {
            "p1": {"A": {"kind": "gaussian", "center": [0.0, 0.0, 0.5], "sigma": 0.1},
                   "q": {"kind": "gaussian", "center": [0.05, 0.0, 0.5], "sigma": 0.12}},
            "p2": {"from": "p1", "q_add": {"kind": "bump", "center": [0.0, 0.05, 0.5], "radius": 0.3,
                                           "amplitude": 0.5}},
        },
        "numerics": {"h_list": [0.4, 0.2, 0.1, 0.05]},
        "xi_grid": {"count": 3, "radius": 3.0, "seed": 0},
    }
    return load_scenario(data=data)


def provenance(sc: Scenario) -> dict:
    """Hash and version stamp embedded in every output file."""
    return {"scenario_hash": sc.hash, "version": __version__, "grid_scale": sc.grid_scale}
