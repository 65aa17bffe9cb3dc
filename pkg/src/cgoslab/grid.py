"""Uniform Cartesian lattices and the truncated slab geometry.

All grids in the package are node-centred and share the convention that the
last axis is the normal direction ``x_n``.  Sub-boxes and enlarged boxes are
carved out of one global lattice so that arrays can be moved between them by
plain slicing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Grid", "Ball", "SlabSpec", "trapezoid_weights"]


def _tuple(x, n=None, cast=float):
    if np.isscalar(x):
        if n is None:
            raise ValueError("scalar given where a per-axis tuple is needed")
        return tuple(cast(x) for _ in range(n))
    return tuple(cast(v) for v in x)


@dataclass(frozen=True)
class Grid:
    """Node-centred uniform grid.

    Parameters
    ----------
    origin : tuple of float
        Coordinates of node ``(0, ..., 0)``.
    spacing : tuple of float
        Node spacing per axis.
    shape : tuple of int
        Number of nodes per axis.
    """

    origin: tuple
    spacing: tuple
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", _tuple(self.origin))
        object.__setattr__(self, "spacing", _tuple(self.spacing))
        object.__setattr__(self, "shape", _tuple(self.shape, cast=int))
        if not (len(self.origin) == len(self.spacing) == len(self.shape)):
            raise ValueError("origin, spacing and shape must have equal length")
        if min(self.spacing) <= 0:
            raise ValueError("grid spacing must be positive")
        if min(self.shape) < 1:
            raise ValueError("grid needs at least one node per axis")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def upper(self) -> tuple:
        return tuple(o + d * (n - 1) for o, d, n in zip(self.origin, self.spacing, self.shape))

    def axis(self, j: int) -> np.ndarray:
        return self.origin[j] + self.spacing[j] * np.arange(self.shape[j])

    def axes(self) -> list:
        return [self.axis(j) for j in range(self.ndim)]

    def mesh(self, sparse: bool = True) -> list:
        return np.meshgrid(*self.axes(), indexing="ij", sparse=sparse)

    def dot(self, v) -> np.ndarray:
        """Evaluate ``x . v`` on the grid (``v`` may be complex)."""
        out = 0
        for xj, vj in zip(self.mesh(), v):
            out = out + xj * vj
        return np.broadcast_to(out, self.shape)

    def weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights (half weight on faces)."""
        w = np.ones(())
        for j in range(self.ndim):
            w = np.multiply.outer(w, trapezoid_weights(self.shape[j], self.spacing[j]))
        return w

    # -- lattice bookkeeping -------------------------------------------------
    def compatible(self, other: "Grid", rtol: float = 1e-9) -> bool:
        """True when both grids are sub-boxes of one lattice."""
        if self.ndim != other.ndim:
            return False
        if not np.allclose(self.spacing, other.spacing, rtol=rtol, atol=0):
            return False
        off = (np.array(self.origin) - np.array(other.origin)) / np.array(self.spacing)
        return bool(np.all(np.abs(off - np.round(off)) < 1e-6))

    def offset_in(self, other: "Grid") -> tuple:
        """Integer index of this grid's origin inside ``other``."""
        if not self.compatible(other):
            raise ValueError("grids do not share a lattice")
        off = (np.array(self.origin) - np.array(other.origin)) / np.array(self.spacing)
        return tuple(int(v) for v in np.round(off))

    def slices_in(self, other: "Grid") -> tuple:
        """Slices locating this grid inside ``other`` (must be contained)."""
        off = self.offset_in(other)
        sl = []
        for o, n, m in zip(off, self.shape, other.shape):
            if o < 0 or o + n > m:
                raise ValueError("grid is not contained in the target grid")
            sl.append(slice(o, o + n))
        return tuple(sl)

    def pad(self, lo, hi=None) -> "Grid":
        """Same lattice, extended by ``lo``/``hi`` nodes on each side."""
        lo = _tuple(lo, self.ndim, int)
        hi = lo if hi is None else _tuple(hi, self.ndim, int)
        origin = tuple(o - l * d for o, l, d in zip(self.origin, lo, self.spacing))
        shape = tuple(n + l + u for n, l, u in zip(self.shape, lo, hi))
        return Grid(origin, self.spacing, shape)

    def sub(self, lo, hi) -> "Grid":
        """Sub-grid of nodes ``lo[j] <= i < hi[j]``."""
        origin = tuple(o + l * d for o, l, d in zip(self.origin, lo, self.spacing))
        shape = tuple(int(u - l) for l, u in zip(lo, hi))
        return Grid(origin, self.spacing, shape)

    def node_index(self, j: int, x: float, tol: float = 1e-6) -> int:
        """Index of the node at coordinate ``x`` on axis ``j``; must be a node."""
        t = (x - self.origin[j]) / self.spacing[j]
        i = int(round(t))
        if abs(t - i) > tol:
            raise ValueError(f"coordinate {x} is not a node on axis {j}")
        return i

    def to_json(self) -> dict:
        return {"dims": list(self.shape), "spacing": list(self.spacing), "origin": list(self.origin)}


def trapezoid_weights(n: int, d: float) -> np.ndarray:
    w = np.full(n, d)
    if n > 1:
        w[0] = w[-1] = 0.5 * d
    return w


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def mask(self, grid: Grid, pad: float = 0.0) -> np.ndarray:
        r2 = 0
        for xj, cj in zip(grid.mesh(), self.center):
            r2 = r2 + (xj - cj) ** 2
        # relative slack so nodes on the sphere are kept under coordinate rounding
        return np.broadcast_to(r2 <= (self.radius + pad) ** 2 * (1 + 1e-10), grid.shape)

    def reflected(self, axis: int, plane: float) -> "Ball":
        c = list(self.center)
        c[axis] = 2 * plane - c[axis]
        return Ball(tuple(c), self.radius)


@dataclass(frozen=True)
class SlabSpec:
    """Truncated slab ``[-R, R]^{n-1} x [0, L]`` with a support ball.

    Parameters
    ----------
    L : float
        Slab thickness.
    R : float
        Lateral half-width of the truncation box.
    center, radius
        Support ball ``B``.
    dim : int
        Spatial dimension, at least 3.
    margin : float, optional
        Required lateral clearance between ``B`` and the box faces, in units
        of ``radius``.  Default 2.
    """

    L: float
    R: float
    center: tuple
    radius: float
    dim: int = 3
    margin: float = 2.0
    ball: Ball = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        if self.dim < 3:
            raise ValueError("dimension must be at least 3")
        if len(self.center) != self.dim:
            raise ValueError("ball center has the wrong dimension")
        if not self.L > 0:
            raise ValueError("slab thickness L must be positive")
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        reach = max(abs(c) for c in self.center[:-1]) + self.radius * (1 + self.margin)
        if not self.R > reach:
            raise ValueError(f"lateral half-width R={self.R} must exceed {reach:.4g} (ball plus margin)")
        cn = self.center[-1]
        if not (cn - self.radius < self.L and cn + self.radius > 0):
            raise ValueError("support ball does not intersect the slab")
        object.__setattr__(self, "ball", Ball(self.center, self.radius))

    def grid(self, n) -> Grid:
        """Slab grid with ``n`` nodes per axis (int or tuple); faces are nodes."""
        n = _tuple(n, self.dim, int)
        spacing = tuple([2 * self.R / (m - 1) for m in n[:-1]] + [self.L / (n[-1] - 1)])
        origin = tuple([-self.R] * (self.dim - 1) + [0.0])
        return Grid(origin, spacing, n)

    def grid_for_spacing(self, dx: float) -> Grid:
        """Slab grid whose spacing is close to (and not above) ``dx``."""
        nl = int(np.ceil(2 * self.R / dx)) + 1
        nn = int(np.ceil(self.L / dx)) + 1
        return self.grid(tuple([nl] * (self.dim - 1) + [nn]))

    def ball_box(self, grid: Grid, pad_nodes: int = 2) -> Grid:
        """Sub-grid of ``grid`` covering ``B`` laterally and all of ``[0, L]``."""
        lo, hi = [], []
        for j in range(self.dim - 1):
            a = int(np.floor((self.center[j] - self.radius - grid.origin[j]) / grid.spacing[j])) - pad_nodes
            b = int(np.ceil((self.center[j] + self.radius - grid.origin[j]) / grid.spacing[j])) + pad_nodes + 1
            lo.append(max(a, 0))
            hi.append(min(b, grid.shape[j]))
        lo.append(0)
        hi.append(grid.shape[-1])
        return grid.sub(lo, hi)

    def plane_masks(self, grid: Grid) -> dict:
        """Boolean masks of ``l1 = Gamma1 & B``, ``l2 = Gamma2 & B`` and ``l3 = Sigma & dB``."""
        inside = self.ball.mask(grid)
        xn = grid.axis(grid.ndim - 1)
        top = np.isclose(xn, self.L, atol=1e-9 * self.L)
        bot = np.isclose(xn, 0.0, atol=1e-9 * self.L)
        l1 = inside & top
        l2 = inside & bot
        r2 = 0
        for xj, cj in zip(grid.mesh(), self.center):
            r2 = r2 + (xj - cj) ** 2
        tol = max(grid.spacing)
        shell = np.abs(np.sqrt(r2) - self.radius) < 0.5 * tol
        l3 = shell & (xn > 0) & (xn < self.L)
        return {"l1": l1, "l2": l2, "l3": np.broadcast_to(l3, grid.shape)}
