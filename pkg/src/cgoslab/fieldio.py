"""Field files: a JSON header next to a raw little-endian complex128 payload."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import PotentialPair, ScalarField, VectorField
from .grid import Ball, Grid

__all__ = ["write_field", "read_field", "write_pair", "read_pair"]

_DTYPE = np.dtype("<c16")


def _header_path(path) -> Path:
    path = Path(path)
    return path if path.suffix == ".json" else path.with_suffix(".json")


def write_field(path, f: ScalarField | VectorField) -> Path:
    """Write ``f`` as ``<path>.json`` + ``<path>.bin``; returns the header path."""
    head = _header_path(path)
    payload = head.with_suffix(".bin")
    header = f.grid.to_json()
    header.update(dtype="c128", order="row-major", payload=payload.name)
    if isinstance(f, VectorField):
        header["components"] = f.grid.ndim
    head.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(f.data, dtype=_DTYPE).tofile(payload)
    head.write_text(json.dumps(header, indent=1))
    return head


def read_field(path) -> ScalarField | VectorField:
    head = _header_path(path)
    header = json.loads(head.read_text())
    if header.get("dtype") != "c128" or header.get("order") != "row-major":
        raise ValueError(f"unsupported field encoding in {head}")
    grid = Grid(header["origin"], header["spacing"], header["dims"])
    data = np.fromfile(head.parent / header["payload"], dtype=_DTYPE)
    ncomp = header.get("components")
    if ncomp is None:
        return ScalarField(grid, data.reshape(grid.shape))
    return VectorField(grid, data.reshape((ncomp,) + grid.shape))


def write_pair(path, p: PotentialPair) -> Path:
    """Persist a pair as a manifest referencing two field files."""
    path = Path(path).with_suffix(".json")
    stem = path.with_suffix("")
    a = write_field(stem.parent / (stem.name + "_A"), p.A)
    q = write_field(stem.parent / (stem.name + "_q"), p.q)
    manifest = {
        "A": a.name,
        "q": q.name,
        "support": [{"center": list(b.center), "radius": b.radius} for b in p.support],
        "L": p.L,
        "boundary_flatness": p.boundary_flatness,
    }
    path.write_text(json.dumps(manifest, indent=1))
    return path


def read_pair(path) -> PotentialPair:
    path = Path(path)
    m = json.loads(path.read_text())
    A = read_field(path.parent / m["A"])
    q = read_field(path.parent / m["q"])
    support = tuple(Ball(tuple(b["center"]), b["radius"]) for b in m["support"])
    return PotentialPair(A, q, support, m["L"], m.get("boundary_flatness", 0.0))
