"""Complex geometric optics solutions ``u = exp(x.zeta/h) (exp(Phi_sharp) + r)``.

Pipeline for one frequency:

1. mollify ``A`` at width ``eps = c h^{1/3}`` and solve the transport
   equation for the phase ``Phi_sharp`` (see :mod:`cgoslab.mollify_dbar`);
2. evaluate the conjugated operator on the amplitude, cut off smoothly
   outside the target domain;
3. solve the conjugated equation for ``r`` on an enlarged box with
   quasi-periodic boundary conditions, using the exact Fourier inverse of
   the ``A = q = 0`` part as a right preconditioner for GMRES;
4. restrict to the target domain and assemble ``u``.

On the lattice, ``exp(x.zeta/h)`` is only approximately annihilated by the
discrete Laplacian.  By default the frequency is nudged to a nearby exact
discrete null vector (``grid_adapted``), so that ``A = q = 0`` gives
``r = 0`` and the pair phase ``exp(x.(w1 + conj w2))`` is exactly
``exp(i x.xi)`` at every node.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .fields import (PotentialPair, ScalarField, VectorField, apply_operator, d1, magnetic_apply,
                     smooth_step)
from .grid import Grid
from .mollify_dbar import DbarPlane, MollifierSpec, build_phase

__all__ = [
    "ComplexFrequency",
    "make_zeta_pair",
    "adapt_to_grid",
    "adapt_pair",
    "conjugated_apply",
    "QuasiPeriodicSolver",
    "SolverError",
    "CgoNumerics",
    "CgoSolution",
    "build_remainder",
    "build_cgo",
    "scl_norm",
]

_TOL = 1e-12


class SolverError(RuntimeError):
    """The discrete conjugated system could not be solved."""


@dataclass(frozen=True)
class ComplexFrequency:
    """``zeta = +-i h xi/2 + i s mu1 +- mu2`` with ``s = sqrt(1 - h^2 |xi|^2/4)``.

    Parameters
    ----------
    xi, mu1, mu2 : array_like
        ``mu1, mu2`` orthonormal and orthogonal to ``xi``.
    h : float
        Semiclassical parameter.
    role : {"zeta1", "zeta2"}
        Sign pattern.
    zeta_grid : tuple, optional
        Lattice-adapted ``zeta`` (exact discrete null vector); set by
        :func:`adapt_pair` or :func:`adapt_to_grid`.
    spacing : tuple, optional
        Lattice spacing ``zeta_grid`` was adapted to.
    """

    xi: tuple
    mu1: tuple
    mu2: tuple
    h: float
    role: str = "zeta1"
    zeta_grid: tuple | None = None
    spacing: tuple | None = None
    zeta: np.ndarray = field(init=False, repr=False, compare=False)
    zeta0: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xi = np.asarray(self.xi, float)
        mu1 = np.asarray(self.mu1, float)
        mu2 = np.asarray(self.mu2, float)
        for name, v in (("xi", xi), ("mu1", mu1), ("mu2", mu2)):
            object.__setattr__(self, name, tuple(float(t) for t in v))
        if not self.h > 0:
            raise ValueError("h must be positive")
        checks = {
            "|xi.mu1| < 1e-12": abs(xi @ mu1),
            "|xi.mu2| < 1e-12": abs(xi @ mu2),
            "|mu1.mu2| < 1e-12": abs(mu1 @ mu2),
            "||mu1| - 1| < 1e-12": abs(np.linalg.norm(mu1) - 1),
            "||mu2| - 1| < 1e-12": abs(np.linalg.norm(mu2) - 1),
        }
        for name, val in checks.items():
            if not val < _TOL * max(1.0, np.linalg.norm(xi)):
                raise ValueError(f"constraint violated: {name} (got {val:.3e})")
        t = self.h**2 * (xi @ xi) / 4
        if not t < 1:
            raise ValueError(f"constraint violated: h^2 |xi|^2 / 4 < 1 (got {t:.6g})")
        if self.role not in ("zeta1", "zeta2"):
            raise ValueError("role must be 'zeta1' or 'zeta2'")
        s = np.sqrt(1 - t)
        sg = 1.0 if self.role == "zeta1" else -1.0
        zeta = sg * 0.5j * self.h * xi + 1j * s * mu1 + sg * mu2
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "zeta0", 1j * mu1 + sg * mu2)
        if self.zeta_grid is not None:
            object.__setattr__(self, "zeta_grid", tuple(complex(z) for z in self.zeta_grid))

    @property
    def zeta1(self) -> np.ndarray:
        """The ``O(h)`` part ``zeta - zeta0``."""
        return self.zeta - self.zeta0

    @property
    def s(self) -> float:
        return float(np.sqrt(1 - self.h**2 * np.dot(self.xi, self.xi) / 4))

    @property
    def omega(self) -> np.ndarray:
        """Exponent rate used on the lattice: ``zeta_grid/h`` if adapted, else ``zeta/h``."""
        z = self.zeta if self.zeta_grid is None else np.asarray(self.zeta_grid)
        return z / self.h

    def plane(self) -> DbarPlane:
        return DbarPlane(tuple(self.zeta0))

    def exponential(self, grid: Grid) -> np.ndarray:
        """``exp(x . omega)`` on the grid."""
        return np.exp(grid.dot(self.omega))


def make_zeta_pair(xi, mu1, mu2, h) -> tuple[ComplexFrequency, ComplexFrequency]:
    """Frequencies with ``zeta_i . zeta_i = 0`` and ``zeta1 + conj(zeta2) = i h xi``."""
    return ComplexFrequency(xi, mu1, mu2, h, "zeta1"), ComplexFrequency(xi, mu1, mu2, h, "zeta2")


# ---------------------------------------------------------------------------
# discrete null vectors


def _null_terms(w, dx):
    # cosh(t) - 1 = 2 sinh(t/2)^2 keeps full relative precision for small t
    return 2 * np.sinh(0.5 * w * dx) ** 2 / dx**2


def _null_residual(w, dx):
    return np.sum(_null_terms(w, dx))


def _null_scale(w, dx):
    return np.sum(np.abs(_null_terms(w, dx)))


def _null_grad(w, dx):
    return np.sinh(w * dx) / dx


def adapt_to_grid(freq: ComplexFrequency, spacing, iters: int = 50) -> ComplexFrequency:
    """Nearest (min-norm Newton) ``omega`` with ``sum_j (cosh(w_j dx_j) - 1)/dx_j^2 = 0``."""
    dx = np.asarray(spacing, float)
    w = freq.zeta / freq.h
    for _ in range(iters):
        F = _null_residual(w, dx)
        if abs(F) < 1e-14 * _null_scale(w, dx):
            break
        g = _null_grad(w, dx)
        w = w - F * np.conj(g) / np.vdot(g, g).real
    else:
        raise SolverError("discrete null frequency did not converge")
    return replace(freq, zeta_grid=tuple(w * freq.h), spacing=tuple(dx))


def adapt_pair(z1: ComplexFrequency, z2: ComplexFrequency, spacing, iters: int = 50):
    """Adapt both frequencies jointly, keeping ``w1 + conj(w2) = i xi`` exact.

    Writes ``w1 = i xi/2 + beta`` and ``conj(w2) = i xi/2 - beta`` and solves
    for ``beta`` by min-norm Gauss-Newton.
    """
    if z1.role != "zeta1" or z2.role != "zeta2":
        raise ValueError("expected (zeta1, zeta2)")
    dx = np.asarray(spacing, float)
    h = z1.h
    half = 0.5j * np.asarray(z1.xi)
    beta = z1.zeta / h - half
    for _ in range(iters):
        R = np.array([_null_residual(half + beta, dx), _null_residual(half - beta, dx)])
        scale = max(_null_scale(half + beta, dx), _null_scale(half - beta, dx))
        if np.max(np.abs(R)) < 1e-14 * scale:
            break
        J = np.array([_null_grad(half + beta, dx), -_null_grad(half - beta, dx)])
        step = np.linalg.lstsq(J, -R, rcond=None)[0]
        beta = beta + step
    else:
        raise SolverError("discrete null frequency pair did not converge")
    w1 = half + beta
    w2 = np.conj(half - beta)
    return (replace(z1, zeta_grid=tuple(w1 * h), spacing=tuple(dx)),
            replace(z2, zeta_grid=tuple(w2 * h), spacing=tuple(dx)))


# ---------------------------------------------------------------------------
# conjugated operator


def _lam(omega, spacing):
    return tuple(np.exp(w * d) for w, d in zip(omega, spacing))


def conjugated_apply(v: ScalarField, p: PotentialPair, zeta: ComplexFrequency, k: float = 0.0) -> ScalarField:
    """``exp(-x.w) h^2 (L_{A,q} - k^2) exp(x.w) v`` with ``w = zeta.omega``.

    Evaluated stencil by stencil with shift multipliers ``exp(w_j dx_j)``,
    so no large exponential is ever formed.  Exact (to rounding) relative to
    :func:`cgoslab.fields.apply_operator`, one-sided face rows included.
    """
    if v.grid != p.grid:
        raise ValueError("grid mismatch between v and p")
    g = v.grid
    A = None if p.magnetic_free else p.A.data
    out = magnetic_apply(v.data, A, p.q.data - k * k, g.spacing, _lam(zeta.omega, g.spacing))
    return ScalarField(g, zeta.h**2 * out)


class QuasiPeriodicSolver:
    """Solve ``(P0 + V) r = g`` on a box with quasi-periodic boundary conditions.

    ``P0 = -h^2 Lap_w`` (conjugated Laplacian) is diagonal in the shifted
    Fourier basis ``exp(i (k + theta).x)``; ``theta`` (half-integer shifts
    per axis) is chosen to keep the symbol away from zero.  ``V`` carries the
    magnetic and electric terms and is applied on the bounding box of their
    support only.
    """

    def __init__(self, grid: Grid, omega, h: float, A: np.ndarray | None, q: np.ndarray):
        self.grid = grid
        self.h = h
        self.lam = _lam(omega, grid.spacing)
        n = grid.ndim
        T = [d * m for d, m in zip(grid.spacing, grid.shape)]
        best = None
        for shift in np.ndindex(*(2,) * n):
            s = 0.5 * np.array(shift)
            sym = 0
            for j in range(n):
                k = 2 * np.pi / T[j] * (sfft.fftfreq(grid.shape[j], 1.0 / grid.shape[j]) + s[j])
                e = np.exp(1j * k * grid.spacing[j])
                t = (self.lam[j] * e + 1.0 / (self.lam[j] * e) - 2.0) / grid.spacing[j] ** 2
                sym = np.add.outer(sym, t) if j else t
            sym = -h * h * sym
            m = np.abs(sym).min()
            if best is None or m > best[0]:
                best = (m, s, sym)
        self.min_symbol, shift, self.symbol = best
        if self.min_symbol < 1e-10 * np.abs(self.symbol).max():
            raise SolverError("conjugated Laplacian symbol is singular on every shifted lattice")
        theta = [2 * np.pi * shift[j] / T[j] for j in range(n)]
        self.phase = np.exp(1j * grid.dot(theta))
        self._setup_potential(A, q)

    def _setup_potential(self, A, q):
        g = self.grid
        nz = np.abs(q) > 0
        if A is not None:
            nz = nz | np.any(np.abs(A) > 0, axis=0)
        self.empty = not np.any(nz)
        if self.empty:
            return
        idx = np.nonzero(nz)
        lo = [int(i.min()) - 2 for i in idx]
        hi = [int(i.max()) + 3 for i in idx]
        if min(lo) < 1 or any(h_ > m - 1 for h_, m in zip(hi, g.shape)):
            raise SolverError("potential support reaches the periodic box edge")
        self.box = tuple(slice(a, b) for a, b in zip(lo, hi))
        self.shifted = []
        for j in range(g.ndim):
            plus = list(self.box)
            minus = list(self.box)
            plus[j] = slice(lo[j] + 1, hi[j] + 1)
            minus[j] = slice(lo[j] - 1, hi[j] - 1)
            self.shifted.append((tuple(plus), tuple(minus)))
        self.q = q[self.box]
        if A is None:
            self.A = None
            self.zeroth = self.q
        else:
            pad = tuple(slice(a - 1, b + 1) for a, b in zip(lo, hi))
            self.A = A[(slice(None),) + pad]
            inner = tuple(slice(1, -1) for _ in range(g.ndim))
            self.zeroth = self.q + np.sum(self.A[(slice(None),) + inner] ** 2, axis=0)

    def P0(self, r):
        return self.phase * sfft.ifftn(self.symbol * sfft.fftn(r / self.phase))

    def P0inv(self, g):
        return self.phase * sfft.ifftn(sfft.fftn(g / self.phase) / self.symbol)

    def V(self, v):
        out = np.zeros(self.grid.shape, complex)
        if self.empty:
            return out
        b = self.box
        acc = self.zeroth * v[b]
        if self.A is not None:
            first = 0
            for j in range(self.grid.ndim):
                plus, minus = self.shifted[j]
                lam, dx = self.lam[j], self.grid.spacing[j]
                Aj = self.A[j]
                inner = tuple(slice(1, -1) for _ in range(self.grid.ndim))
                lo_p = list(inner)
                lo_m = list(inner)
                lo_p[j] = slice(2, None)
                lo_m[j] = slice(0, -2)
                Av_p = Aj[tuple(lo_p)] * v[plus]
                Av_m = Aj[tuple(lo_m)] * v[minus]
                first = first + (Aj[inner] * (lam * v[plus] - v[minus] / lam) + (lam * Av_p - Av_m / lam)) / (2 * dx)
            acc = acc - 1j * first
        out[b] = self.h**2 * acc
        return out

    def apply(self, r):
        return self.P0(r) + self.V(r)

    def solve(self, g: np.ndarray, rtol: float = 1e-10, restart: int = 60, maxiter: int = 30):
        """Right-preconditioned GMRES; returns ``(r, info)``."""
        if not np.any(g):
            return np.zeros(self.grid.shape, complex), {"iterations": 0, "residual": 0.0}
        if self.empty:
            r = self.P0inv(g)
            return r, {"iterations": 0, "residual": float(np.linalg.norm(self.apply(r) - g) / np.linalg.norm(g))}
        shape = self.grid.shape
        n = self.grid.size

        def mv(y):
            y = y.reshape(shape)
            return (y + self.V(self.P0inv(y))).ravel()

        count = [0]

        def cb(_):
            count[0] += 1

        op = LinearOperator((n, n), matvec=mv, dtype=complex)
        y, info = gmres(op, g.ravel(), rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter,
                        callback=cb, callback_type="pr_norm")
        r = self.P0inv(y.reshape(shape))
        res = float(np.linalg.norm(self.apply(r) - g) / np.linalg.norm(g))
        if info != 0 and res > 100 * rtol:
            raise SolverError(f"GMRES did not converge (info={info}, relative residual {res:.3e})")
        return r, {"iterations": count[0], "residual": res}


# ---------------------------------------------------------------------------
# CGO assembly


@dataclass(frozen=True)
class CgoNumerics:
    """Numerical knobs of the CGO construction.

    ``eps`` overrides the coupling ``eps = eps_coupling * h^{1/3}`` (expert
    mode for studying the ``h eps^{-2} + eps`` surface).
    """

    eps_coupling: float = 1.0
    eps: float | None = None
    enlarge: float = 1.5
    min_pad: int = 8
    rtol: float = 1e-10
    restart: int = 60
    maxiter: int = 30
    memory_budget: float = 1.5e9
    grid_adapted: bool = True
    raw_phase: bool = False
    cauchy_mode: str = "auto"
    k: float = 0.0

    def eps_for(self, h: float) -> float:
        return self.eps if self.eps is not None else self.eps_coupling * h ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class CgoSolution:
    """Assembled CGO solution on the target grid and its diagnostics."""

    freq: ComplexFrequency
    amplitude: ScalarField
    remainder: ScalarField
    u: ScalarField
    norms: dict
    eps: float
    phi_sharp: ScalarField
    phi: ScalarField | None = None
    info: dict = field(default_factory=dict)


def scl_norm(r: ScalarField, h: float) -> dict:
    """``||r||``, ``||h D r||`` and ``||r||_{H^1_scl}`` by trapezoid quadrature."""
    g = r.grid
    w = g.weights()
    l2 = float(np.sqrt(np.sum(w * np.abs(r.data) ** 2)))
    grad2 = sum(np.abs(d1(r.data, j, g.spacing[j])) ** 2 for j in range(g.ndim))
    hd = float(h * np.sqrt(np.sum(w * grad2)))
    return {"l2": l2, "hd": hd, "h1_scl": float(np.hypot(l2, hd))}


def _cutoff_1d(n: int, inner: slice, width_min: int = 2) -> np.ndarray:
    """1 on ``inner`` (plus one node), smooth decay to 0 two nodes before each end."""
    i = np.arange(n, dtype=float)
    a0, a1 = inner.start - 1, inner.stop
    lo = (i - 2) / max(a0 - 2, width_min)
    hi = (n - 3 - i) / max(n - 3 - a1, width_min)
    return smooth_step(np.minimum(lo, 1.0)) * smooth_step(np.minimum(hi, 1.0)) * (i >= 2) * (i <= n - 3)


def _box_for(grid: Grid, eps: float, num: CgoNumerics, mollified: bool = True) -> tuple[Grid, tuple]:
    lo, hi = [], []
    for j in range(grid.ndim):
        m = grid.shape[j]
        spread = int(np.ceil(eps / grid.spacing[j])) + 4 if mollified else 0
        pad = max(int(np.ceil(0.5 * (num.enlarge - 1) * (m - 1))), spread, num.min_pad)
        total = sfft.next_fast_len(m + 2 * pad)
        lo.append(pad)
        hi.append(total - m - pad)
    box = grid.pad(lo, hi)
    return box, grid.slices_in(box)


def _solve(p: PotentialPair, freq: ComplexFrequency, num: CgoNumerics):
    grid = p.grid
    h = freq.h
    if num.grid_adapted and (freq.zeta_grid is None or not np.allclose(freq.spacing, grid.spacing)):
        freq = adapt_to_grid(freq, grid.spacing)
    eps = num.eps_for(h)
    q_eff = p.q.data - num.k**2 * p.mask if num.k else p.q.data
    trivial = p.magnetic_free and not np.any(q_eff)
    info = {"eps": eps}
    if trivial:
        zero = np.zeros(grid.shape, complex)
        return freq, eps, np.ones(grid.shape, complex), zero, zero, None, info
    box, inner = _box_for(grid, eps, num, mollified=not p.magnetic_free)
    A = None
    if not p.magnetic_free:
        A = np.zeros((grid.ndim,) + box.shape, complex)
        A[(slice(None),) + inner] = p.A.data
    q = np.zeros(box.shape, complex)
    q[inner] = q_eff
    phi = None
    if A is not None:
        phi_s, phi_raw, _ = build_phase(VectorField(box, A), freq.plane(), MollifierSpec(eps),
                                        raw=num.raw_phase, mode=num.cauchy_mode)
        phi_sharp = phi_s.data
        phi = None if phi_raw is None else phi_raw.data[inner]
    else:
        phi_sharp = np.zeros(box.shape, complex)
    a = np.exp(phi_sharp)
    chi = np.ones(())
    for j in range(box.ndim):
        chi = np.multiply.outer(chi, _cutoff_1d(box.shape[j], inner[j]))
    lam = _lam(freq.omega, box.spacing)
    rhs = -chi * h**2 * magnetic_apply(a, A, q, box.spacing, lam)
    solver = QuasiPeriodicSolver(box, freq.omega, h, A, q)
    # the Krylov basis holds restart + 1 complex vectors of the box size
    restart = int(min(num.restart, max(10, num.memory_budget // (16 * box.size) - 1)))
    r, sinfo = solver.solve(rhs, rtol=num.rtol, restart=restart, maxiter=num.maxiter)
    sinfo["restart"] = restart
    info.update(sinfo, box=box.shape, min_symbol=float(solver.min_symbol))
    return freq, eps, a[inner], r[inner], phi_sharp[inner], phi, info


def build_remainder(p: PotentialPair, zeta: ComplexFrequency, eps: float | None = None,
                    numerics: CgoNumerics | None = None) -> ScalarField:
    """Remainder ``r`` of the CGO solution for ``(p, zeta)`` on ``p.grid``."""
    num = numerics or CgoNumerics()
    if eps is not None:
        num = replace(num, eps=eps)
    _, _, _, r, _, _, _ = _solve(p, zeta, num)
    return ScalarField(p.grid, r)


def build_cgo(p: PotentialPair, zeta: ComplexFrequency, h: float | None = None,
              numerics: CgoNumerics | None = None) -> CgoSolution:
    """Assemble ``u = exp(x.zeta/h)(exp(Phi_sharp) + r)`` on ``p.grid``.

    ``h`` defaults to ``zeta.h`` and must agree with it when given.
    """
    if h is not None and abs(h - zeta.h) > 1e-15 * h:
        raise ValueError("h does not match the frequency")
    num = numerics or CgoNumerics()
    freq, eps, a, r, phi_sharp, phi, info = _solve(p, zeta, num)
    grid = p.grid
    u = freq.exponential(grid) * (a + r)
    rf = ScalarField(grid, r)
    norms = scl_norm(rf, freq.h)
    Lu = apply_operator(ScalarField(grid, u), p, num.k).data
    sl = tuple(slice(1, -1) for _ in range(grid.ndim))
    g2 = sum(np.abs(d1(u, j, grid.spacing[j])) ** 2 for j in range(grid.ndim))
    h1 = np.sqrt(np.sum(np.abs(u) ** 2 + g2))
    norms["defect"] = float(np.linalg.norm(Lu[sl]) / h1)
    return CgoSolution(
        freq=freq,
        amplitude=ScalarField(grid, a),
        remainder=rf,
        u=ScalarField(grid, u),
        norms=norms,
        eps=eps,
        phi_sharp=ScalarField(grid, phi_sharp),
        phi=None if phi is None else ScalarField(grid, phi),
        info=info,
    )
