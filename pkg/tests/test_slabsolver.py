import numpy as np
import pytest

from cgoslab.cgo import SolverError
from cgoslab.fields import PotentialPair, ScalarField, gauge_transform
from cgoslab.grid import Ball, Grid, SlabSpec
from cgoslab.potentials import make_pair, radius2
from cgoslab.slabsolver import (BoundaryDatum, check_admissible, dtn_apply, green_check,
                                poisson_dirichlet, solve_dirichlet)

from conftest import random_smooth

SPEC = SlabSpec(L=1.0, R=1.0, center=(0, 0, 0.5), radius=0.3)


def _laplace_oracle(g):
    # u = sin sin sinh solves Lap u = 0 with data on x_n = L only
    R = 1.0
    X, Y, Z = g.mesh()
    k = np.sqrt(2) * np.pi / (2 * R)
    lat = np.sin(np.pi * (X + R) / (2 * R)) * np.sin(np.pi * (Y + R) / (2 * R))
    return lat * np.sinh(k * Z) / np.sinh(k), lat[..., 0] * k / np.tanh(k)


def test_free_dirichlet_and_dtn_converge():
    errs, derrs = [], []
    for n in (17, 33):
        g = SPEC.grid((n, n, n))
        p = PotentialPair.from_arrays(g, None, None, SPEC.ball, 1.0)
        f = BoundaryDatum.from_function(g, lambda x, y: np.sin(np.pi * (x + 1) / 2) * np.sin(np.pi * (y + 1) / 2))
        u_ex, dn_ex = _laplace_oracle(g)
        errs.append(np.abs(solve_dirichlet(p, 0, f).data - u_ex).max())
        d = dtn_apply(p, 0, f, "gamma1").output
        derrs.append(np.linalg.norm(d - dn_ex) / np.linalg.norm(dn_ex))
    assert np.log2(errs[0] / errs[1]) > 1.8
    assert np.log2(derrs[0] / derrs[1]) > 1.7 and derrs[1] < 5e-3


def test_poisson_dirichlet_inverts_the_stencil():
    rng = np.random.default_rng(2)
    g = rng.standard_normal((9, 10, 11))
    u = poisson_dirichlet(g, (0.1, 0.1, 0.1))
    pad = np.pad(u, 1)
    lap = sum((np.roll(pad, 1, j) + np.roll(pad, -1, j) - 2 * pad) for j in range(3))[1:-1, 1:-1, 1:-1] / 0.01
    np.testing.assert_allclose(-lap, g, atol=1e-10)


def test_green_identity_converges_at_second_order():
    gaps = []
    for n in (25, 49):
        g = Grid((0, 0, 0), (1 / (n - 1),) * 3, (n,) * 3)
        rng = np.random.default_rng(3)
        u, v = ScalarField(g, random_smooth(g, rng)), ScalarField(g, random_smooth(g, rng))
        A = np.stack([random_smooth(g, rng, 2) for _ in range(3)])
        p = PotentialPair.from_arrays(g, A, random_smooth(g, rng, 2), Ball((0.5,) * 3, 2.0), 1.0)
        gaps.append(green_check(u, v, p)[2])
    assert abs(np.log2(gaps[0] / gaps[1]) - 2) < 0.3


def test_dtn_gauge_gap_shrinks():
    gaps = []
    for n in (25, 49):
        g = SPEC.grid((n, n, n))
        p = make_pair(g, SPEC.ball, 1.0, {"kind": "gaussian", "center": (0, 0, .5), "sigma": .1},
                      {"kind": "gaussian", "center": (0.05, 0, .5), "sigma": .1})
        psi = ScalarField(g, 0.5 * np.maximum(1 - radius2(g, (0, 0, 0.5)) / 0.16, 0) ** 4 + 0j)
        f = BoundaryDatum.from_function(g, lambda x, y: np.exp(-(x**2 + y**2) / 0.1))
        a = dtn_apply(p, 0, f).output
        b = dtn_apply(gauge_transform(p, psi, invariance=True), 0, f).output
        gaps.append(np.linalg.norm(a - b) / np.linalg.norm(a))
    assert gaps[1] < gaps[0] / 2.5


def test_boundary_datum_validation():
    with pytest.raises(ValueError, match="vanish outside"):
        BoundaryDatum(np.ones((3, 3)), np.eye(3, dtype=bool))
    with pytest.raises(ValueError, match="non-finite"):
        BoundaryDatum(np.full((2, 2), np.nan))
    d = BoundaryDatum(np.eye(3), np.eye(3, dtype=bool))
    with pytest.raises(ValueError, match="contain"):
        d.check_contains(np.ones((3, 3), bool))


def test_dirichlet_eigenvalue_is_inadmissible():
    g = SPEC.grid((9, 9, 9))
    p = PotentialPair.from_arrays(g, None, None, SPEC.ball, 1.0)
    # smallest eigenvalue of -Lap_h on the interior
    lam = sum((2 - 2 * np.cos(np.pi / (m - 1))) / d**2 for m, d in zip(g.shape, g.spacing))
    assert not check_admissible(p, np.sqrt(lam))["admissible"]
    f = BoundaryDatum(np.ones(g.shape[:-1]))
    with pytest.raises(SolverError, match="inadmissible"):
        solve_dirichlet(p, np.sqrt(lam), f)
    with pytest.raises(ValueError, match="shape"):
        solve_dirichlet(p, 0.0, BoundaryDatum(np.ones((3, 3))))
