"""Even/odd extensions across the slab planes and partial-data CGO solutions.

A potential on ``Sigma & B`` is extended across ``Gamma2`` (``x_n = 0``) or
``Gamma1`` (``x_n = L``): tangential components and ``q`` evenly, ``A_n``
oddly.  The extended operator commutes with the reflection, so a CGO
solution minus its mirror image still solves the equation and vanishes on the
mirror plane.  The doubled grid is symmetric by construction (reflection is
index reversal along the last axis), so the cancellation is exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cgo import CgoNumerics, CgoSolution, ComplexFrequency, build_cgo
from .fields import PotentialPair, ScalarField, VectorField
from .grid import Grid

__all__ = [
    "ReflectedDomain",
    "PartialCgo",
    "extend_even_odd",
    "partial_cgo_gamma2",
    "partial_cgo_gamma1",
    "partial_cgo_same_plane",
    "build_partial",
]

MIRRORS = ("gamma2", "gamma1")


@dataclass(frozen=True)
class ReflectedDomain:
    """Base grid, mirror plane and the doubled, mirror-symmetric grid."""

    base: Grid
    mirror: str
    L: float
    doubled: Grid
    base_slices: tuple

    @classmethod
    def build(cls, base: Grid, mirror: str, L: float) -> "ReflectedDomain":
        if mirror not in MIRRORS:
            raise ValueError(f"mirror must be one of {MIRRORS}")
        n = base.ndim - 1
        m = base.shape[n]
        if mirror == "gamma2":
            if base.node_index(n, 0.0) != 0:
                raise ValueError("base grid must start at x_n = 0")
            doubled = base.pad([0] * n + [m - 1], [0] * (n + 1))
            sl = slice(m - 1, 2 * m - 1)
        else:
            if base.node_index(n, L) != m - 1:
                raise ValueError("base grid must end at x_n = L")
            doubled = base.pad([0] * (n + 1), [0] * n + [m - 1])
            sl = slice(0, m)
        return cls(base, mirror, L, doubled, (slice(None),) * n + (sl,))

    @property
    def plane(self) -> float:
        return 0.0 if self.mirror == "gamma2" else self.L

    def reflect(self, a: np.ndarray) -> np.ndarray:
        """Compose a doubled-grid array with the reflection (index reversal)."""
        return a[..., ::-1]

    def restrict(self, a: np.ndarray) -> np.ndarray:
        return a[(Ellipsis,) + self.base_slices] if a.ndim > self.base.ndim else a[self.base_slices]


def extend_even_odd(p: PotentialPair, mirror: str, tol: float = 1e-12) -> PotentialPair:
    """Extend ``p`` across ``mirror``; ``A_n`` oddly, everything else evenly.

    Raises
    ------
    ValueError
        If the trace of ``A_n`` on the mirror plane does not vanish.
    """
    dom = ReflectedDomain.build(p.grid, mirror, p.L)
    n = p.grid.ndim - 1
    k = 0 if mirror == "gamma2" else p.grid.shape[n] - 1
    trace = np.abs(p.A.data[n][..., k])
    scale = max(1.0, float(np.abs(p.A.data).max()))
    if trace.max() > tol * scale:
        raise ValueError(f"trace of A_n on {mirror} is nonzero (max {trace.max():.3e}); normalize first")
    m = p.grid.shape[n]

    def ext(a, odd):
        out = np.empty(a.shape[:-1] + (2 * m - 1,), complex)
        if mirror == "gamma2":
            out[..., m - 1:] = a
            out[..., :m - 1] = (-1 if odd else 1) * a[..., :0:-1]
        else:
            out[..., :m] = a
            out[..., m:] = (-1 if odd else 1) * a[..., -2::-1]
        return out

    A = np.stack([ext(p.A.data[j], j == n) for j in range(n + 1)])
    A[n][..., m - 1] = 0.0  # the mirror plane is index m - 1 in both layouts
    q = ext(p.q.data, False)
    support = p.support + tuple(b.reflected(n, dom.plane) for b in p.support)
    return PotentialPair(VectorField(dom.doubled, A), ScalarField(dom.doubled, q), support, p.L,
                         p.boundary_flatness)


@dataclass(frozen=True, eq=False)
class PartialCgo:
    """``u`` on the base grid plus the doubled-domain CGO it was built from."""

    u: ScalarField
    solution: CgoSolution
    domain: ReflectedDomain
    potential: PotentialPair


def build_partial(p: PotentialPair, zeta: ComplexFrequency, mirror: str, conjugate: bool,
                  numerics: CgoNumerics | None = None) -> PartialCgo:
    """``u = u~ - u~ o R`` with ``u~`` the CGO for the extended (optionally conjugated) pair."""
    q = p.conj() if conjugate else p
    pe = extend_even_odd(q, mirror)
    dom = ReflectedDomain.build(p.grid, mirror, p.L)
    sol = build_cgo(pe, zeta, numerics=numerics)
    ut = sol.u.data
    u = dom.restrict(ut - dom.reflect(ut))
    return PartialCgo(ScalarField(p.grid, u), sol, dom, pe)


def _check_role(zeta: ComplexFrequency, role: str):
    if zeta.role != role:
        raise ValueError(f"expected a frequency of role {role}, got {zeta.role}")


def partial_cgo_gamma2(p1: PotentialPair, zeta1: ComplexFrequency, h: float | None = None,
                       numerics: CgoNumerics | None = None, full: bool = False):
    """Solution for ``p1`` vanishing on ``Gamma2`` (mirror across ``x_n = 0``)."""
    _check_role(zeta1, "zeta1")
    if h is not None and abs(h - zeta1.h) > 1e-15 * h:
        raise ValueError("h does not match the frequency")
    out = build_partial(p1, zeta1, "gamma2", False, numerics)
    return out if full else out.u


def partial_cgo_gamma1(p2: PotentialPair, zeta2: ComplexFrequency, h: float | None = None,
                       numerics: CgoNumerics | None = None, full: bool = False):
    """Solution for ``(conj A2, conj q2)`` vanishing on ``Gamma1`` (mirror across ``x_n = L``)."""
    _check_role(zeta2, "zeta2")
    if h is not None and abs(h - zeta2.h) > 1e-15 * h:
        raise ValueError("h does not match the frequency")
    out = build_partial(p2, zeta2, "gamma1", True, numerics)
    return out if full else out.u


def partial_cgo_same_plane(p2: PotentialPair, zeta2: ComplexFrequency, h: float | None = None,
                           numerics: CgoNumerics | None = None, full: bool = False):
    """Solution for ``(conj A2, conj q2)`` vanishing on ``Gamma2``; needs ``mu2_n = 0``, ``mu1_n != 0``."""
    _check_role(zeta2, "zeta2")
    if h is not None and abs(h - zeta2.h) > 1e-15 * h:
        raise ValueError("h does not match the frequency")
    if abs(zeta2.mu2[-1]) > 1e-12:
        raise ValueError("constraint violated: mu2_n = 0")
    if abs(zeta2.mu1[-1]) <= 1e-12:
        raise ValueError("constraint violated: mu1_n != 0")
    out = build_partial(p2, zeta2, "gamma2", True, numerics)
    return out if full else out.u
