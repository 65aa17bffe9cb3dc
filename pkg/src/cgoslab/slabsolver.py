"""Dirichlet problem on the truncated slab, DtN samples and Green's formula.

The forward problem ``(L_{A,q} - k^2) u = 0`` with ``u = f`` on ``Gamma1``
(``x_n = L``) and ``u = 0`` on every other face is solved for the interior
nodes by GMRES, right-preconditioned with the exact inverse of the discrete
Dirichlet Laplacian (a type-I sine transform).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .cgo import SolverError
from .fields import PotentialPair, ScalarField, apply_operator, d1
from .grid import Grid, trapezoid_weights

__all__ = [
    "BoundaryDatum",
    "DtnSample",
    "check_admissible",
    "solve_dirichlet",
    "dtn_apply",
    "normal_derivative",
    "green_check",
    "poisson_dirichlet",
]


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    """Dirichlet data ``f`` on the ``Gamma1`` face, supported in ``gamma``.

    Parameters
    ----------
    f : ndarray
        Samples on the lateral grid of the face (shape ``grid.shape[:-1]``).
    gamma : ndarray of bool, optional
        Support set ``gamma1``; defaults to the whole face.
    """

    f: np.ndarray
    gamma: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.f, complex)
        gamma = np.ones(f.shape, bool) if self.gamma is None else np.asarray(self.gamma, bool)
        if gamma.shape != f.shape:
            raise ValueError("gamma and f must have the same shape")
        if np.any(f[~gamma]):
            raise ValueError("f must vanish outside gamma")
        if not np.all(np.isfinite(f)):
            raise ValueError("f contains non-finite values")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "gamma", gamma)

    def check_contains(self, l1: np.ndarray) -> None:
        """Raise unless ``gamma`` contains the face set ``l1 = Gamma1 & closure(B)``."""
        if np.any(l1 & ~self.gamma):
            raise ValueError("gamma1 must contain Gamma1 & closure(B)")

    @classmethod
    def from_function(cls, grid: Grid, func, gamma=None) -> "BoundaryDatum":
        X = np.meshgrid(*grid.axes()[:-1], indexing="ij")
        f = np.asarray(func(*X), complex)
        if gamma is not None:
            f = np.where(gamma, f, 0.0)
        return cls(f, gamma)


@dataclass(frozen=True, eq=False)
class DtnSample:
    """``(d_nu + i A.nu) u`` on a measurement face, zero outside ``mask``."""

    input: BoundaryDatum
    output: np.ndarray
    face: str
    mask: np.ndarray
    k: float
    geometry: str
    meta: dict = field(default_factory=dict)


def _dirichlet_symbol(grid: Grid, k: float = 0.0) -> np.ndarray:
    """Eigenvalues of ``-Lap_h - k^2`` on interior nodes (zero Dirichlet)."""
    sym = 0
    for j in range(grid.ndim):
        m = grid.shape[j] - 2
        t = (2 - 2 * np.cos(np.pi * np.arange(1, m + 1) / (m + 1))) / grid.spacing[j] ** 2
        sym = np.add.outer(sym, t) if j else t
    return sym - k * k


def poisson_dirichlet(g: np.ndarray, spacing, k: float = 0.0, symbol=None) -> np.ndarray:
    """Solve ``(-Lap_h - k^2) u = g`` on interior nodes with zero Dirichlet data."""
    sym = symbol if symbol is not None else _dirichlet_symbol(Grid((0,) * g.ndim, spacing, np.array(g.shape) + 2), k)
    return sfft.idstn(sfft.dstn(g, type=1) / sym, type=1)


def check_admissible(p: PotentialPair, k: float = 0.0, full: bool = False, iters: int = 4,
                     limit: float = 1e12) -> dict:
    """Condition estimate of the discrete forward operator.

    The cheap estimate is the spectral condition number of ``-Lap_h - k^2``
    plus a bound for the potential terms.  With ``full=True`` a few steps of
    inverse power iteration (each one forward solve) refine ``||M^{-1}||``.
    """
    g = p.grid
    sym = _dirichlet_symbol(g, k)
    smin = float(np.abs(sym).min())
    vbound = float(np.abs(p.q.data).max() + np.sum(np.abs(p.A.data) ** 2, axis=0).max()
                   + 2 * np.abs(p.A.data).max() * sum(1 / d for d in g.spacing))
    smax = float(np.abs(sym).max()) + vbound
    cond = smax / smin if smin > 0 else np.inf
    out = {"cond_estimate": cond, "method": "symbol"}
    if full and np.isfinite(cond):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(sym.shape) + 0j
        x /= np.linalg.norm(x)
        nrm = 0.0
        for _ in range(iters):
            y = _solve_interior(p, k, x, 1e-8)
            nrm = float(np.linalg.norm(y))
            x = y / nrm
        out.update(cond_estimate=max(cond, smax * nrm), method="inverse-iteration")
    out["admissible"] = bool(out["cond_estimate"] < limit)
    return out


def _interior_apply(u: np.ndarray, A, q: np.ndarray, spacing) -> np.ndarray:
    """Centred-stencil operator at interior nodes of the full array ``u``."""
    n = u.ndim
    c = tuple(slice(1, -1) for _ in range(n))

    def sh(j, s):
        t = list(c)
        t[j] = slice(1 + s, u.shape[j] - 1 + s)
        return tuple(t)

    out = 0
    for j in range(n):
        out = out - (u[sh(j, 1)] - 2 * u[c] + u[sh(j, -1)]) / spacing[j] ** 2
    if A is not None:
        first = 0
        for j in range(n):
            Au = A[j] * u
            first = first + (A[j][c] * (u[sh(j, 1)] - u[sh(j, -1)]) + Au[sh(j, 1)] - Au[sh(j, -1)]) / (2 * spacing[j])
        out = out - 1j * first
        q = q + np.sum(A * A, axis=0)
    return out + q[c] * u[c]


def _solve_interior(p: PotentialPair, k: float, rhs: np.ndarray, rtol: float,
                    restart: int = 60, maxiter: int = 40) -> np.ndarray:
    g = p.grid
    A = None if p.magnetic_free else p.A.data
    q = p.q.data - k * k
    sym = _dirichlet_symbol(g, k)
    shape = sym.shape
    full = np.zeros(g.shape, complex)
    c = tuple(slice(1, -1) for _ in range(g.ndim))

    def M(v):
        full[c] = v
        return _interior_apply(full, A, q, g.spacing)

    def Pinv(y):
        return sfft.idstn(sfft.dstn(y, type=1) / sym, type=1)

    if A is None and not np.any(p.q.data):
        return Pinv(rhs)
    n = int(np.prod(shape))
    op = LinearOperator((n, n), matvec=lambda y: M(Pinv(y.reshape(shape))).ravel(), dtype=complex)
    y, info = gmres(op, rhs.ravel(), rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter)
    v = Pinv(y.reshape(shape))
    res = np.linalg.norm(M(v) - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if info != 0 and res > 100 * rtol:
        raise SolverError(f"forward solve did not converge (info={info}, residual {res:.3e}); k may be inadmissible")
    return v


def solve_dirichlet(p: PotentialPair, k: float, f: BoundaryDatum, rtol: float = 1e-10) -> ScalarField:
    """Solve ``(L_{A,q} - k^2) u = 0`` with ``u = f`` on ``Gamma1`` and zero elsewhere.

    Raises
    ------
    ValueError
        If ``f`` does not match the face grid.
    SolverError
        If the system is inadmissible (condition estimate too large) or the
        iteration fails.
    """
    g = p.grid
    if f.f.shape != g.shape[:-1]:
        raise ValueError(f"boundary datum shape {f.f.shape} does not match the face {g.shape[:-1]}")
    adm = check_admissible(p, k)
    if not adm["admissible"]:
        raise SolverError(f"inadmissible k={k}: condition estimate {adm['cond_estimate']:.3e}")
    u = np.zeros(g.shape, complex)
    if not np.any(f.f):
        return ScalarField(g, u)
    u[..., -1] = f.f
    for j in range(g.ndim - 1):  # lateral faces stay zero
        sl = [slice(None)] * g.ndim
        sl[j] = 0
        u[tuple(sl)] = 0
        sl[j] = -1
        u[tuple(sl)] = 0
    A = None if p.magnetic_free else p.A.data
    rhs = -_interior_apply(u, A, p.q.data - k * k, g.spacing)
    c = tuple(slice(1, -1) for _ in range(g.ndim))
    u[c] = _solve_interior(p, k, rhs, rtol)
    return ScalarField(g, u)


def normal_derivative(u: np.ndarray, spacing, face: str) -> np.ndarray:
    """Outward normal derivative on ``Gamma1``/``Gamma2`` (3-point one-sided)."""
    dz = spacing[-1]
    if face == "gamma1":
        return (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * dz)
    if face == "gamma2":
        return -(-3 * u[..., 0] + 4 * u[..., 1] - u[..., 2]) / (2 * dz)
    raise ValueError(f"unknown face {face!r}")


def dtn_apply(p: PotentialPair, k: float, f: BoundaryDatum, measure_set="gamma2",
              rtol: float = 1e-10) -> DtnSample:
    """Magnetic conormal derivative ``(d_nu + i A.nu) u`` on a measurement set.

    ``measure_set`` is ``"gamma2"`` (opposite face), ``"gamma1"`` (data
    face), or a tuple ``(face, mask)`` restricting to a subset.
    """
    face, mask = (measure_set, None) if isinstance(measure_set, str) else measure_set
    u = solve_dirichlet(p, k, f, rtol).data
    g = p.grid
    dn = normal_derivative(u, g.spacing, face)
    idx = -1 if face == "gamma1" else 0
    sign = 1.0 if face == "gamma1" else -1.0
    out = dn + 1j * sign * p.A.data[-1][..., idx] * u[..., idx]
    mask = np.ones(out.shape, bool) if mask is None else np.asarray(mask, bool)
    geometry = "theorem-1.1" if face == "gamma2" else "theorem-1.2"
    return DtnSample(f, np.where(mask, out, 0.0), face, mask, k, geometry,
                     {"admissibility": "discrete invertibility surrogate"})


def _face_weights(grid: Grid, axis: int) -> np.ndarray:
    w = np.ones(())
    for j in range(grid.ndim):
        if j != axis:
            w = np.multiply.outer(w, trapezoid_weights(grid.shape[j], grid.spacing[j]))
    return w


def green_check(u: ScalarField, v: ScalarField, p: PotentialPair) -> tuple[complex, complex, float]:
    """Both sides of Green's formula for ``L_{A,q}`` on the whole grid box.

    ``lhs = (L_{A,q} u, v) - (u, L_{conj A, conj q} v)`` and
    ``rhs = -\\int_{boundary} [(d_nu + i A.nu) u conj(v) - u conj((d_nu + i nu.conj(A)) v)]``.
    """
    if not (u.grid == v.grid == p.grid):
        raise ValueError("grid mismatch")
    g = p.grid
    w = g.weights()
    Lu = apply_operator(u, p).data
    Lv = apply_operator(v, p.conj()).data
    lhs = complex(np.sum(w * (Lu * np.conj(v.data) - u.data * np.conj(Lv))))
    rhs = 0j
    for j in range(g.ndim):
        fw = _face_weights(g, j)
        du = d1(u.data, j, g.spacing[j])
        dv = d1(v.data, j, g.spacing[j])
        for idx, sign in ((0, -1.0), (-1, 1.0)):
            take = lambda a: np.take(a, idx, axis=j)  # noqa: E731
            An = sign * take(p.A.data[j])
            uu, vv = take(u.data), take(v.data)
            cu = sign * take(du) + 1j * An * uu
            cv = sign * take(dv) + 1j * np.conj(An) * vv
            rhs -= complex(np.sum(fw * (cu * np.conj(vv) - uu * np.conj(cv))))
    gap = abs(lhs - rhs) / max(abs(lhs) + abs(rhs), 1e-300)
    return lhs, rhs, gap
