"""Mollification and the planar Cauchy transform.

``N = zeta0 . grad`` is a d-bar operator in the plane spanned by
``e1 = Re zeta0`` and ``e2 = Im zeta0``.  Its inverse is the Cauchy transform

    (N^{-1} f)(x) = 1/(2 pi) \\int f(x - y1 e1 - y2 e2) / (y1 + i y2) dy1 dy2,

evaluated here as a zero-padded FFT convolution on every plane slice.  The
kernel sample at the origin is replaced by its cell average, which is zero
because ``1/z`` is odd.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma, pi

import numpy as np
import scipy.fft as sfft
from scipy import integrate, ndimage
from scipy.signal import fftconvolve

from .fields import ScalarField, VectorField, d1
from .grid import Grid

__all__ = [
    "MollifierSpec",
    "DbarPlane",
    "mollify",
    "cauchy_2d",
    "cauchy_transform",
    "build_phase",
    "transport_residual",
]


@lru_cache(maxsize=None)
def _bump_mass(dim: int) -> float:
    """``\\int_{|x|<1} exp(-1/(1-|x|^2)) dx`` by adaptive quadrature."""
    radial, _ = integrate.quad(lambda r: r ** (dim - 1) * np.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                               epsabs=1e-15, epsrel=1e-13)
    return 2 * pi ** (dim / 2) / gamma(dim / 2) * radial


@dataclass(frozen=True)
class MollifierSpec:
    """Standard mollifier ``eta_eps(x) = eps^{-n} eta(x/eps)``.

    ``eta = C exp(-1/(1-|x|^2))`` on the unit ball with ``C`` fixed by
    quadrature so that ``\\int eta = 1``.
    """

    eps: float
    kernel: str = "bump"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("mollification width eps must be positive")
        if self.kernel != "bump":
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @staticmethod
    def eta(x2: np.ndarray, dim: int) -> np.ndarray:
        """Normalised kernel as a function of ``|x|^2``."""
        inside = x2 < 1
        out = np.zeros(np.shape(x2))
        out[inside] = np.exp(-1.0 / (1.0 - x2[inside]))
        return out / _bump_mass(dim)

    def samples(self, spacing) -> np.ndarray:
        """Kernel samples on the lattice, renormalised to unit discrete mass."""
        axes = []
        for d in spacing:
            m = int(np.ceil(self.eps / d))
            axes.append(np.arange(-m, m + 1) * d / self.eps)
        x2 = sum(t**2 for t in np.meshgrid(*axes, indexing="ij", sparse=True))
        k = self.eta(np.broadcast_to(x2, tuple(len(a) for a in axes)), len(spacing))
        return k / k.sum()


def mollify(A, spec: MollifierSpec):
    """Convolve each component of ``A`` (zero-extended) with ``eta_eps``.

    Raises
    ------
    ValueError
        If ``eps < 2 dx`` on some axis (kernel under-resolved).
    """
    g = A.grid
    if spec.eps < 2 * max(g.spacing) * (1 - 1e-9):
        raise ValueError(f"eps={spec.eps:.4g} under-resolved: need eps >= 2 dx = {2 * max(g.spacing):.4g}")
    k = spec.samples(g.spacing)
    data = A.data if isinstance(A, VectorField) else A.data[None]
    support = np.any(data != 0, axis=0)
    # FFT convolution leaves rounding noise everywhere; keep only supp A + eps
    grown = fftconvolve(support.astype(float), (k > 0).astype(float), mode="same") > 0.5
    out = np.stack([_conv(a, k) * grown for a in data])
    if isinstance(A, ScalarField):
        return ScalarField(g, out[0])
    return VectorField(g, out)


def _conv(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    if not np.any(a):
        return np.zeros(a.shape, complex)
    re = fftconvolve(a.real, k, mode="same")
    if np.any(a.imag):
        return re + 1j * fftconvolve(a.imag, k, mode="same")
    return re.astype(complex)


@dataclass(frozen=True)
class DbarPlane:
    """Plane of a null direction ``zeta0`` (``zeta0 . zeta0 = 0``, unit real/imag parts)."""

    zeta0: tuple
    e1: np.ndarray = field(init=False, repr=False)
    e2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        z = np.asarray(self.zeta0, complex)
        object.__setattr__(self, "zeta0", tuple(z))
        e1, e2 = z.real.copy(), z.imag.copy()
        if abs(np.sum(z * z)) >= 1e-12:
            raise ValueError("zeta0 . zeta0 must vanish")
        if abs(e1 @ e2) >= 1e-12 or abs(np.linalg.norm(e1) - 1) >= 1e-12 or abs(np.linalg.norm(e2) - 1) >= 1e-12:
            raise ValueError("Re zeta0 and Im zeta0 must be orthonormal")
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.zeta0)

    def axis_aligned(self):
        """``(ax1, s1, ax2, s2)`` when ``e1 = s1 E_ax1`` and ``e2 = s2 E_ax2``, else None."""
        out = []
        for e in (self.e1, self.e2):
            j = int(np.argmax(np.abs(e)))
            if abs(abs(e[j]) - 1) > 1e-12:
                return None
            out += [j, float(np.sign(e[j]))]
        return tuple(out)

    def frame(self) -> np.ndarray:
        """Orthonormal basis with ``e1, e2`` as its first two rows."""
        n = len(self.e1)
        basis = [self.e1, self.e2]
        for v in np.eye(n):
            w = v - sum((v @ b) * b for b in basis)
            if np.linalg.norm(w) > 1e-6:
                basis.append(w / np.linalg.norm(w))
            if len(basis) == n:
                break
        return np.array(basis)

    def apply(self, u: ScalarField) -> ScalarField:
        """Forward operator ``zeta0 . grad u`` with the package stencil."""
        g = u.grid
        out = sum(zj * d1(u.data, j, g.spacing[j]) for j, zj in enumerate(self.zeta0) if zj != 0)
        return ScalarField(g, out)


def cauchy_2d(f: np.ndarray, d1_: float, d2_: float, s1: float = 1.0, s2: float = 1.0,
              batch_bytes: float = 2.5e8) -> np.ndarray:
    """Cauchy transform over the last two axes of ``f`` (batched over the rest).

    The kernel is ``1/(2 pi (s1 t1 + i s2 t2))`` on the lattice of offsets.
    """
    n1, n2 = f.shape[-2:]
    t1 = np.arange(-(n1 - 1), n1) * d1_
    t2 = np.arange(-(n2 - 1), n2) * d2_
    z = s1 * t1[:, None] + 1j * s2 * t2[None, :]
    z[n1 - 1, n2 - 1] = 1.0
    K = 1.0 / (2 * pi * z)
    K[n1 - 1, n2 - 1] = 0.0
    s = (sfft.next_fast_len(2 * n1 - 1), sfft.next_fast_len(2 * n2 - 1))
    Kh = sfft.fft2(K, s)
    lead = f.shape[:-2]
    flat = f.reshape((-1, n1, n2))
    out = np.empty(flat.shape, complex)
    step = max(1, int(batch_bytes // (16 * s[0] * s[1])))
    for i in range(0, flat.shape[0], step):
        blk = flat[i:i + step]
        full = sfft.ifft2(sfft.fft2(blk, s) * Kh)
        out[i:i + step] = full[:, n1 - 1:2 * n1 - 1, n2 - 1:2 * n2 - 1]
    return (out * (d1_ * d2_)).reshape(lead + (n1, n2))


def _cache_path(tag: str, *arrays) -> str | None:
    root = os.environ.get("CGO_SLAB_CACHE")
    if not root:
        return None
    h = hashlib.sha256(tag.encode())
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    os.makedirs(root, exist_ok=True)
    return os.path.join(root, h.hexdigest() + ".npy")


def cauchy_transform(f: ScalarField, plane: DbarPlane, mode: str = "auto") -> ScalarField:
    """Solve ``zeta0 . grad u = f`` by the Cauchy transform.

    Parameters
    ----------
    mode : {"auto", "axis", "general"}
        ``axis`` requires ``(e1, e2)`` to be signed grid axes; ``general``
        resamples onto a rotated lattice with trilinear interpolation.

    Raises
    ------
    ValueError
        If ``f`` is nonzero on the outer node layer, or ``axis`` mode is
        requested for a plane that is not grid-aligned.
    """
    g = f.grid
    edge = np.zeros(g.shape, bool)
    for j in range(g.ndim):
        sl = [slice(None)] * g.ndim
        sl[j] = 0
        edge[tuple(sl)] = True
        sl[j] = -1
        edge[tuple(sl)] = True
    if np.any(f.data[edge]):
        raise ValueError("f is nonzero on the grid edge; enlarge the grid")
    if not np.any(f.data):
        return ScalarField(g, np.zeros(g.shape, complex))
    aligned = plane.axis_aligned()
    if mode == "axis" and aligned is None:
        raise ValueError("plane is not axis-aligned")
    cache = _cache_path(f"cauchy{mode}{plane.zeta0}{g}", f.data)
    if cache and os.path.exists(cache):
        return ScalarField(g, np.load(cache))
    if aligned is not None and mode != "general":
        ax1, s1, ax2, s2 = aligned
        h = np.moveaxis(f.data, (ax1, ax2), (-2, -1))
        out = cauchy_2d(h, g.spacing[ax1], g.spacing[ax2], s1, s2)
        out = np.moveaxis(out, (-2, -1), (ax1, ax2))
    else:
        out = _cauchy_general(f, plane)
    if cache:
        np.save(cache, out)
    return ScalarField(g, out)


def _cauchy_general(f: ScalarField, plane: DbarPlane) -> np.ndarray:
    g = f.grid
    Q = plane.frame()
    dx = min(g.spacing)
    corners = np.array(np.meshgrid(*[[g.origin[j], g.upper[j]] for j in range(g.ndim)],
                                   indexing="ij")).reshape(g.ndim, -1)
    rc = Q @ corners
    lo, hi = rc.min(axis=1) - dx, rc.max(axis=1) + dx
    shape = tuple(int(np.ceil((b - a) / dx)) + 1 for a, b in zip(lo, hi))
    # rotated lattice node positions in physical coordinates -> index space of g
    axes = [lo[j] + dx * np.arange(shape[j]) for j in range(g.ndim)]
    Y = np.meshgrid(*axes, indexing="ij", sparse=True)
    phys = [sum(Q[k, j] * Y[k] for k in range(g.ndim)) for j in range(g.ndim)]
    coords = [np.broadcast_to((phys[j] - g.origin[j]) / g.spacing[j], shape) for j in range(g.ndim)]

    def resample(a, c):
        re = ndimage.map_coordinates(a.real, c, order=1, mode="constant", cval=0.0)
        im = ndimage.map_coordinates(a.imag, c, order=1, mode="constant", cval=0.0)
        return re + 1j * im

    fr = resample(f.data, coords)
    ur = np.moveaxis(cauchy_2d(np.moveaxis(fr, (0, 1), (-2, -1)), dx, dx), (-2, -1), (0, 1))
    X = g.mesh()
    back = [np.broadcast_to((sum(Q[k, j] * X[j] for j in range(g.ndim)) - lo[k]) / dx, g.shape)
            for k in range(g.ndim)]
    return resample(ur, back)


def build_phase(A: VectorField, plane: DbarPlane, spec: MollifierSpec, raw: bool = True,
                mode: str = "auto"):
    """Phases ``Phi_sharp = N^{-1}(-i zeta0 . A_sharp)`` and ``Phi = N^{-1}(-i zeta0 . A)``.

    Returns
    -------
    phi_sharp, phi : ScalarField
        ``phi`` is None when ``raw`` is False.
    A_sharp : VectorField
    """
    z = plane.vector
    A_sharp = mollify(A, spec)
    f_sharp = -1j * np.tensordot(z, A_sharp.data, axes=1)
    phi_sharp = cauchy_transform(ScalarField(A.grid, f_sharp), plane, mode)
    phi = None
    if raw:
        f = -1j * np.tensordot(z, A.data, axes=1)
        phi = cauchy_transform(ScalarField(A.grid, f), plane, mode)
    return phi_sharp, phi, A_sharp


def transport_residual(phi: ScalarField, A: VectorField, plane: DbarPlane, trim: int = 1) -> float:
    """``||zeta0 . D phi + zeta0 . A|| / ||zeta0 . A||`` over interior nodes."""
    z = plane.vector
    zA = np.tensordot(z, A.data, axes=1)
    res = -1j * plane.apply(phi).data + zA
    sl = tuple(slice(trim, -trim) for _ in range(phi.grid.ndim))
    return float(np.linalg.norm(res[sl]) / np.linalg.norm(zA[sl]))
