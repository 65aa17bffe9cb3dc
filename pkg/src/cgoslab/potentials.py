"""Blob library for test potentials.

Profiles are plain arrays on a grid; :func:`make_pair` turns them into a
masked :class:`~cgoslab.fields.PotentialPair`.  The rough profiles are merely
bounded (jumps across cell faces or a square-root edge), which is the class of
coefficients the CGO construction is meant to handle.
"""
from __future__ import annotations

import numpy as np

from .fields import PotentialPair, ScalarField, smooth_step
from .grid import Ball, Grid

__all__ = [
    "radius2",
    "gaussian",
    "indicator",
    "shell",
    "sqrt_edge",
    "bump",
    "multiscale_rough",
    "profile",
    "make_pair",
    "gauge_bump",
]


def radius2(grid: Grid, center) -> np.ndarray:
    r2 = 0
    for xj, cj in zip(grid.mesh(), center):
        r2 = r2 + (xj - cj) ** 2
    return np.broadcast_to(r2, grid.shape)


def gaussian(grid: Grid, center, sigma: float) -> np.ndarray:
    return np.exp(-radius2(grid, center) / (2 * sigma**2))


def indicator(grid: Grid, center, radius: float) -> np.ndarray:
    return (radius2(grid, center) < radius**2).astype(float)


def shell(grid: Grid, center, r_in: float, r_out: float) -> np.ndarray:
    r2 = radius2(grid, center)
    return ((r2 >= r_in**2) & (r2 < r_out**2)).astype(float)


def sqrt_edge(grid: Grid, center, radius: float) -> np.ndarray:
    """``sqrt(1 - |x-c|^2/rho^2)``: continuous, not Lipschitz at the rim."""
    return np.sqrt(np.maximum(1.0 - radius2(grid, center) / radius**2, 0.0))


def bump(grid: Grid, center, radius: float) -> np.ndarray:
    """Smooth compactly supported bump, 1 at the centre, 0 beyond ``radius``."""
    t = np.sqrt(radius2(grid, center)) / radius
    return 1.0 - smooth_step(t)


def multiscale_rough(grid: Grid, center, radius: float, seed: int = 1,
                     cells=(0.4, 0.2, 0.1), table: int = 64) -> np.ndarray:
    """Sum of random +-1 piecewise-constant fields on three cell scales.

    Cells are anchored to the absolute lattice ``floor((x + 3)/cell)`` so the
    profile is the same function at every grid resolution.
    """
    rng = np.random.default_rng(seed)
    out = np.zeros(grid.shape)
    X = [np.broadcast_to(x, grid.shape) for x in grid.mesh()]
    for cell in cells:
        vals = rng.choice([-1.0, 1.0], (table,) * grid.ndim)
        idx = tuple(np.floor((x + 3.0) / cell).astype(int) % table for x in X)
        out += vals[idx] / len(cells)
    return out * (radius2(grid, center) < radius**2)


def profile(grid: Grid, spec: dict) -> np.ndarray:
    """Evaluate a profile described by a dict ``{"kind": ..., ...}``."""
    kind = spec["kind"]
    c = spec.get("center")
    if kind == "gaussian":
        out = gaussian(grid, c, spec["sigma"])
    elif kind == "indicator":
        out = indicator(grid, c, spec["radius"])
    elif kind == "shell":
        out = shell(grid, c, spec["r_in"], spec["r_out"])
    elif kind == "sqrt_edge":
        out = sqrt_edge(grid, c, spec["radius"])
    elif kind == "bump":
        out = bump(grid, c, spec["radius"])
    elif kind == "multiscale":
        out = multiscale_rough(grid, c, spec["radius"], seed=spec.get("seed", 1))
    elif kind == "zero":
        out = np.zeros(grid.shape)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    return spec.get("amplitude", 1.0) * out


def make_pair(grid: Grid, ball: Ball, L: float, A_spec=None, q_spec=None,
              direction=(1.0, 0.5, -0.7), boundary_flatness: float = 0.0) -> PotentialPair:
    """Build a pair with ``A = direction * profile(A_spec)`` and ``q = profile(q_spec)``.

    ``A_spec`` may also be a list of dicts with their own ``direction`` keys,
    whose contributions are summed.
    """
    A = np.zeros((grid.ndim,) + grid.shape, complex)
    specs = [] if A_spec is None else (A_spec if isinstance(A_spec, list) else [A_spec])
    for s in specs:
        d = np.asarray(s.get("direction", direction), float)
        prof = profile(grid, s)
        for j in range(grid.ndim):
            A[j] += d[j] * prof
    q = np.zeros(grid.shape, complex)
    specs = [] if q_spec is None else (q_spec if isinstance(q_spec, list) else [q_spec])
    for s in specs:
        q += profile(grid, s)
    return PotentialPair.from_arrays(grid, A, q, ball, L, boundary_flatness)


def gauge_bump(grid: Grid, center, radius: float, amplitude: float = 1.0) -> ScalarField:
    """Smooth gauge function supported strictly inside a ball."""
    return ScalarField(grid, amplitude * bump(grid, center, radius))
