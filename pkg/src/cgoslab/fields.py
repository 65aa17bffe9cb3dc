"""Complex grid fields, the magnetic Schrodinger operator and gauge maps.

The operator is

    L_{A,q} u = -Lap u + A.Du + D.(A u) + (A.A + q) u,      D = -i grad,

discretised with one family of second-order stencils: centred differences in
the interior and second-order one-sided differences on box faces.  Every
first-derivative stencil is the same one-dimensional operator applied along
an axis, so mixed differences commute and ``d(grad psi) = 0`` holds to
rounding.

All stencils accept an optional per-axis multiplier ``lam``.  With
``lam = exp(w dx)`` the stencil equals ``exp(-x.w) S exp(x.w)`` exactly, which
is how the conjugated operator is evaluated without forming large
exponentials.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Ball, Grid

__all__ = [
    "ScalarField",
    "VectorField",
    "PotentialPair",
    "d1",
    "d2",
    "gradient",
    "laplacian",
    "magnetic_apply",
    "apply_operator",
    "exterior_derivative",
    "gauge_transform",
    "normalize_normal_component",
    "smooth_step",
]


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex samples on a grid (row-major, ``data.shape == grid.shape``)."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.shape != self.grid.shape:
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "data", data)

    def with_data(self, data) -> "ScalarField":
        return ScalarField(self.grid, data)

    def conj(self) -> "ScalarField":
        return ScalarField(self.grid, np.conj(self.data))

    def restrict(self, grid: Grid) -> "ScalarField":
        return ScalarField(grid, self.data[grid.slices_in(self.grid)])

    def embed(self, grid: Grid) -> "ScalarField":
        out = np.zeros(grid.shape, complex)
        out[self.grid.slices_in(grid)] = self.data
        return ScalarField(grid, out)

    def norm(self) -> float:
        """Trapezoid L2 norm."""
        return float(np.sqrt(np.sum(self.grid.weights() * np.abs(self.data) ** 2)))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape, complex))


@dataclass(frozen=True, eq=False)
class VectorField:
    """``n`` complex components on one grid; ``data.shape == (n, *grid.shape)``."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.shape != (self.grid.ndim,) + self.grid.shape:
            raise ValueError(f"vector data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "data", data)

    def __getitem__(self, j) -> ScalarField:
        return ScalarField(self.grid, self.data[j])

    @property
    def components(self) -> tuple:
        return tuple(self[j] for j in range(self.grid.ndim))

    def conj(self) -> "VectorField":
        return VectorField(self.grid, np.conj(self.data))

    def restrict(self, grid: Grid) -> "VectorField":
        return VectorField(grid, self.data[(slice(None),) + grid.slices_in(self.grid)])

    def embed(self, grid: Grid) -> "VectorField":
        out = np.zeros((grid.ndim,) + grid.shape, complex)
        out[(slice(None),) + self.grid.slices_in(grid)] = self.data
        return VectorField(grid, out)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.ndim,) + grid.shape, complex))


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Magnetic potential ``A`` and electric potential ``q`` with compact support.

    Both fields are masked to the union of the ``support`` balls on
    construction, so they vanish identically outside it.

    Parameters
    ----------
    A : VectorField
    q : ScalarField
    support : tuple of Ball
        Usually the single ball ``B``; reflected or gauge-enlarged pairs carry
        more than one.
    L : float
        Thickness of the slab the pair lives in.
    boundary_flatness : float
        Width ``delta`` near the slab faces inside which ``A`` and ``q`` are
        assumed continuous, so that the trace of ``A_n`` is meaningful.
    """

    A: VectorField
    q: ScalarField
    support: tuple
    L: float
    boundary_flatness: float = 0.0
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.A.grid != self.q.grid:
            raise ValueError("A and q live on different grids")
        support = (self.support,) if isinstance(self.support, Ball) else tuple(self.support)
        if not support:
            raise ValueError("a potential pair needs a support ball")
        object.__setattr__(self, "support", support)
        grid = self.q.grid
        mask = np.zeros(grid.shape, bool)
        for b in support:
            mask |= b.mask(grid)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "A", VectorField(grid, self.A.data * mask))
        object.__setattr__(self, "q", ScalarField(grid, self.q.data * mask))

    @property
    def grid(self) -> Grid:
        return self.q.grid

    @property
    def ball(self) -> Ball:
        return self.support[0]

    @property
    def magnetic_free(self) -> bool:
        return not np.any(self.A.data)

    def conj(self) -> "PotentialPair":
        return replace(self, A=self.A.conj(), q=self.q.conj())

    def restrict(self, grid: Grid) -> "PotentialPair":
        return replace(self, A=self.A.restrict(grid), q=self.q.restrict(grid))

    def embed(self, grid: Grid) -> "PotentialPair":
        return replace(self, A=self.A.embed(grid), q=self.q.embed(grid))

    def with_fields(self, A=None, q=None, support=None) -> "PotentialPair":
        return replace(
            self,
            A=self.A if A is None else A,
            q=self.q if q is None else q,
            support=self.support if support is None else support,
        )

    @classmethod
    def from_arrays(cls, grid, A, q, support, L, boundary_flatness=0.0) -> "PotentialPair":
        A = np.zeros((grid.ndim,) + grid.shape, complex) if A is None else A
        q = np.zeros(grid.shape, complex) if q is None else q
        return cls(VectorField(grid, A), ScalarField(grid, q), support, L, boundary_flatness)


# ---------------------------------------------------------------------------
# stencils


def d1(f: np.ndarray, axis: int, dx: float, lam=1.0) -> np.ndarray:
    """Second-order first derivative along ``axis``; ``lam`` is the shift multiplier."""
    f = np.moveaxis(f, axis, 0)
    if f.shape[0] < 3:
        raise ValueError("need at least 3 nodes per axis")
    out = np.empty(f.shape, dtype=np.result_type(f, lam, 1.0))
    out[1:-1] = lam * f[2:] - f[:-2] / lam
    out[0] = -3 * f[0] + 4 * lam * f[1] - lam**2 * f[2]
    out[-1] = 3 * f[-1] - 4 / lam * f[-2] + f[-3] / lam**2
    out /= 2 * dx
    return np.moveaxis(out, 0, axis)


def d2(f: np.ndarray, axis: int, dx: float, lam=1.0) -> np.ndarray:
    """Second-order second derivative; four-point one-sided rows on faces."""
    f = np.moveaxis(f, axis, 0)
    if f.shape[0] < 4:
        raise ValueError("need at least 4 nodes per axis")
    out = np.empty(f.shape, dtype=np.result_type(f, lam, 1.0))
    out[1:-1] = lam * f[2:] - 2 * f[1:-1] + f[:-2] / lam
    out[0] = 2 * f[0] - 5 * lam * f[1] + 4 * lam**2 * f[2] - lam**3 * f[3]
    out[-1] = 2 * f[-1] - 5 / lam * f[-2] + 4 / lam**2 * f[-3] - f[-4] / lam**3
    out /= dx * dx
    return np.moveaxis(out, 0, axis)


def gradient(f, spacing=None) -> np.ndarray | VectorField:
    """Stencil gradient of a ScalarField (or of an array with ``spacing``)."""
    if isinstance(f, ScalarField):
        g = f.grid
        return VectorField(g, np.stack([d1(f.data, j, g.spacing[j]) for j in range(g.ndim)]))
    return np.stack([d1(f, j, spacing[j]) for j in range(f.ndim)])


def laplacian(f: np.ndarray, spacing, lam=None) -> np.ndarray:
    lam = lam if lam is not None else (1.0,) * f.ndim
    out = d2(f, 0, spacing[0], lam[0])
    for j in range(1, f.ndim):
        out += d2(f, j, spacing[j], lam[j])
    return out


def magnetic_apply(u, A, q, spacing, lam=None) -> np.ndarray:
    """Array kernel of ``-Lap u + A.Du + D.(A u) + (A.A + q) u``.

    ``A`` may be ``None`` (no magnetic terms).  ``lam`` gives the per-axis
    shift multipliers of the conjugated stencil.
    """
    n = u.ndim
    lam = lam if lam is not None else (1.0,) * n
    out = -laplacian(u, spacing, lam)
    zeroth = q
    if A is not None:
        first = 0
        for j in range(n):
            first = first + A[j] * d1(u, j, spacing[j], lam[j]) + d1(A[j] * u, j, spacing[j], lam[j])
        out += -1j * first
        zeroth = zeroth + np.sum(A * A, axis=0)
    out += zeroth * u
    return out


def apply_operator(u: ScalarField, p: PotentialPair, k: float = 0.0) -> ScalarField:
    """``(L_{A,q} - k^2) u`` with the package stencils.

    Raises
    ------
    ValueError
        If ``u`` and ``p`` are on different grids.
    """
    if u.grid != p.grid:
        raise ValueError("grid mismatch between u and p")
    A = None if p.magnetic_free else p.A.data
    return ScalarField(u.grid, magnetic_apply(u.data, A, p.q.data - k * k, u.grid.spacing))


def exterior_derivative(A: VectorField) -> np.ndarray:
    """Magnetic field ``(dA)_{jk} = d_j A_k - d_k A_j``.

    Returns
    -------
    ndarray, shape (n, n, *grid.shape)
        Antisymmetric array; the diagonal is exactly zero.
    """
    g = A.grid
    n = g.ndim
    out = np.zeros((n, n) + g.shape, complex)
    for j in range(n):
        for k in range(j + 1, n):
            c = d1(A.data[k], j, g.spacing[j]) - d1(A.data[j], k, g.spacing[k])
            out[j, k] = c
            out[k, j] = -c
    return out


# ---------------------------------------------------------------------------
# gauge maps


def _covering_ball(mask: np.ndarray, grid: Grid, pad: float) -> Ball | None:
    idx = np.nonzero(mask)
    if len(idx[0]) == 0:
        return None
    lo = np.array([grid.origin[j] + grid.spacing[j] * idx[j].min() for j in range(grid.ndim)])
    hi = np.array([grid.origin[j] + grid.spacing[j] * idx[j].max() for j in range(grid.ndim)])
    return Ball(tuple(0.5 * (lo + hi)), 0.5 * np.linalg.norm(hi - lo) + pad)


def _on_slab_boundary(grid: Grid, L: float) -> np.ndarray:
    """Mask of grid-face nodes plus nodes on the planes ``x_n = 0, L``."""
    m = np.zeros(grid.shape, bool)
    for j in range(grid.ndim):
        sl = [slice(None)] * grid.ndim
        sl[j] = 0
        m[tuple(sl)] = True
        sl[j] = -1
        m[tuple(sl)] = True
    xn = grid.axis(grid.ndim - 1)
    planes = np.isclose(xn, 0.0, atol=1e-9) | np.isclose(xn, L, atol=1e-9 * L)
    m[..., planes] = True
    return m


def gauge_transform(p: PotentialPair, psi: ScalarField, invariance: bool = False) -> PotentialPair:
    """Return ``(A + grad psi, q)``.

    The support is enlarged by a ball covering ``supp psi`` when needed.  With
    ``invariance=True`` a ``psi`` that does not vanish on the slab boundary is
    rejected, since the DtN map is then not preserved.
    """
    if psi.grid != p.grid:
        raise ValueError("grid mismatch between psi and p")
    if invariance:
        bad = np.abs(psi.data[_on_slab_boundary(p.grid, p.L)])
        if bad.size and bad.max() > 0:
            raise ValueError(f"psi does not vanish on the slab boundary (max {bad.max():.3e})")
    if not np.any(psi.data):
        return p
    A = p.A.data + gradient(psi.data, p.grid.spacing)
    support = p.support
    outside = (psi.data != 0) & ~p.mask
    if np.any(outside) or np.any((A != 0) & ~p.mask):
        ball = _covering_ball(psi.data != 0, p.grid, 2.5 * max(p.grid.spacing))
        support = support + (ball,)
    return p.with_fields(A=VectorField(p.grid, A), support=support)


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, float)
    with np.errstate(over="ignore"):  # 1/t overflows for subnormal t; exp(-inf) = 0 is right
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _cutoff(t, delta):
    """1 on ``[0, delta/3]``, 0 beyond ``delta/2``."""
    return 1.0 - smooth_step((t - delta / 3) / (delta / 6))


def normalize_normal_component(p: PotentialPair) -> tuple[PotentialPair, ScalarField]:
    """Gauge ``p`` so that the trace of ``A_n`` vanishes on ``x_n = 0`` and ``x_n = L``.

    Uses ``psi = -x_n chi(x_n) A_n(x', 0) - (x_n - L) chi(L - x_n) A_n(x', L)``
    with ``chi`` equal to 1 on ``[0, delta/3]`` and 0 beyond ``delta/2``.  The
    grid must contain both planes as node layers.
    """
    delta = p.boundary_flatness
    if not delta > 0:
        raise ValueError("boundary_flatness must be positive to take the trace of A_n")
    g = p.grid
    xn = g.axis(g.ndim - 1)
    dz = g.spacing[-1]
    if delta / 3 < 2 * dz * (1 - 1e-9):
        raise ValueError(f"boundary_flatness {delta} is under-resolved; need delta >= 6 dx_n = {6 * dz:.4g}")
    i0 = g.node_index(g.ndim - 1, 0.0)
    iL = g.node_index(g.ndim - 1, p.L)
    if not (0 <= i0 < g.shape[-1] and 0 <= iL < g.shape[-1]):
        raise ValueError("grid does not contain both slab planes")
    An = p.A.data[-1]
    t0, tL = An[..., i0], An[..., iL]
    if not (np.any(t0) or np.any(tL)):
        return p, ScalarField.zeros(g)
    z = xn - xn[i0]
    w = p.L - xn
    # (L - x_n) chi(L - x_n) A_n(x', L) carries the sign that makes d_n psi = -A_n at x_n = L
    psi = -(z * _cutoff(z, delta)) * t0[..., None] + (w * _cutoff(w, delta)) * tL[..., None]
    psi = np.where((z >= 0) & (w >= 0), psi, 0.0)
    psi = ScalarField(g, psi)
    return gauge_transform(p, psi), psi
