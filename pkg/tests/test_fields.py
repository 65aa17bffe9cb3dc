import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgoslab.fields import (PotentialPair, ScalarField, VectorField, apply_operator, d1, d2,
                            exterior_derivative, gauge_transform, gradient, laplacian,
                            normalize_normal_component, smooth_step)
from cgoslab.grid import Ball, Grid, SlabSpec, trapezoid_weights
from cgoslab.potentials import gauge_bump, make_pair

from conftest import GAUSS_A, GAUSS_Q

GRID = Grid((-1.0, -1.0, 0.0), (0.1, 0.1, 0.05), (21, 21, 21))


def test_d1_exact_on_quadratics_including_faces():
    x = GRID.axis(2)
    f = np.broadcast_to(3 * x**2 - x + 2, GRID.shape)
    np.testing.assert_allclose(d1(f, 2, 0.05), np.broadcast_to(6 * x - 1, GRID.shape), atol=1e-11)


def test_d2_exact_on_quadratics():
    x = GRID.axis(0)[:, None, None]
    f = np.broadcast_to(0.5 * x**2 + x, GRID.shape)
    np.testing.assert_allclose(d2(f, 0, 0.1), 1.0, atol=1e-10)


def test_shift_multiplier_matches_conjugation():
    # d1(u, lam) must equal e^{-w x} d1(e^{w x} u) with lam = e^{w dx}
    w, dx = 0.7 - 1.3j, 0.05
    x = np.arange(30) * dx
    u = np.cos(2 * x) + 1j * x
    ref = np.exp(-w * x) * d1(np.exp(w * x) * u, 0, dx)
    got = d1(u, 0, dx, lam=np.exp(w * dx))
    np.testing.assert_allclose(got[1:-1], ref[1:-1], rtol=1e-12)


def test_operator_on_plane_wave_converges_at_second_order():
    # L e^{ik.x} = ((k + A)^2 + q) e^{ik.x} for constant A, q
    k = np.array([1.0, -2.0, 0.5])
    A0 = np.array([0.3, 0.1, -0.2])
    errs = []
    for n in (17, 33, 65):
        g = Grid((0, 0, 0), (1 / (n - 1),) * 3, (n,) * 3)
        u = np.exp(1j * g.dot(k))
        A = np.stack([np.full(g.shape, a, complex) for a in A0])
        p = PotentialPair.from_arrays(g, A, np.full(g.shape, 2.0 + 0j), Ball((0.5,) * 3, 2.0), 1.0)
        Lu = apply_operator(ScalarField(g, u), p).data
        exact = (np.sum((k + A0) ** 2) + 2.0) * u
        s = (slice(1, -1),) * 3
        errs.append(np.abs(Lu - exact)[s].max())
    slope = np.polyfit(np.log([1 / 16, 1 / 32, 1 / 64]), np.log(errs), 1)[0]
    assert 1.8 < slope < 2.2


def test_laplacian_of_discrete_null_exponential_vanishes():
    # sum_j (cosh(w_j dx) - 1) = 0 makes e^{x.w} discretely harmonic
    dx = 0.1
    # cosh(t dx) - 1 = 0.5 and cos(s dx) - 1 = -0.5 cancel
    w = np.array([np.arccosh(1.5) / dx, 1j * np.arccos(0.5) / dx, 0.0])
    g = Grid((0, 0, 0), (dx,) * 3, (9, 9, 9))
    u = np.exp(g.dot(w))
    lap = laplacian(u, g.spacing)
    s = (slice(1, -1),) * 3
    assert np.abs(lap[s]).max() < 1e-10 * np.abs(u).max() / dx**2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_exterior_derivative_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    g = Grid((0, 0, 0), (0.2, 0.25, 0.1), (5, 6, 7))
    A = VectorField(g, rng.standard_normal((3,) + g.shape) + 1j * rng.standard_normal((3,) + g.shape))
    F = exterior_derivative(A)
    np.testing.assert_array_equal(F, -np.swapaxes(F, 0, 1))
    for j in range(3):
        assert not np.any(F[j, j])


def test_exterior_derivative_of_linear_field():
    # A = M x gives dA_jk = M_kj - M_jk exactly
    M = np.array([[0.0, 1.0, 2.0], [-0.5, 0.3, 0.0], [1.5, 0.0, -1.0]])
    X = [np.broadcast_to(x, GRID.shape) for x in GRID.mesh()]
    A = VectorField(GRID, np.stack([sum(M[i, j] * X[j] for j in range(3)) for i in range(3)]) + 0j)
    F = exterior_derivative(A)
    for j in range(3):
        for k in range(3):
            np.testing.assert_allclose(F[j, k], M[k, j] - M[j, k], atol=1e-12)


def test_gauge_transform_preserves_field_and_rejects_boundary_values():
    spec = SlabSpec(L=1.0, R=1.5, center=(0, 0, 0.5), radius=0.45)
    g = spec.ball_box(spec.grid((41, 41, 21)))
    p = make_pair(g, spec.ball, 1.0, GAUSS_A, GAUSS_Q)
    psi = gauge_bump(g, (0, 0, 0.5), 0.35, 0.3)
    pg = gauge_transform(p, psi, invariance=True)
    dF = exterior_derivative(pg.A) - exterior_derivative(p.A)
    assert np.abs(dF).max() < 1e-12 * np.abs(exterior_derivative(p.A)).max()
    np.testing.assert_allclose(pg.A.data - p.A.data, gradient(psi.data, g.spacing), atol=1e-14)
    bad = ScalarField(g, np.ones(g.shape, complex))
    with pytest.raises(ValueError, match="vanish on the slab boundary"):
        gauge_transform(p, bad, invariance=True)


def test_pair_is_masked_to_support():
    g = Grid((-1, -1, 0), (0.1, 0.1, 0.1), (21, 21, 11))
    p = PotentialPair.from_arrays(g, np.ones((3,) + g.shape, complex), np.ones(g.shape, complex),
                                  Ball((0, 0, 0.5), 0.3), 1.0)
    outside = ~Ball((0, 0, 0.5), 0.3).mask(g)
    assert not np.any(p.q.data[outside]) and not np.any(p.A.data[:, outside])


def test_normalize_normal_component_kills_traces():
    g = Grid((-0.5, -0.5, 0.0), (0.05, 0.05, 0.025), (21, 21, 41))
    X = g.mesh()
    An = np.broadcast_to(np.exp(-(X[0] ** 2 + X[1] ** 2) / 0.05) * (1 + X[2]), g.shape)
    A = np.stack([np.zeros(g.shape), np.zeros(g.shape), An]) + 0j
    p = PotentialPair.from_arrays(g, A, None, Ball((0, 0, 0.5), 1.0), 1.0, boundary_flatness=0.3)
    pn, psi = normalize_normal_component(p)
    assert np.abs(pn.A.data[2][..., 0]).max() < 1e-12
    assert np.abs(pn.A.data[2][..., -1]).max() < 1e-12
    # it is a gauge: the field is unchanged and psi vanishes on both planes
    assert not np.any(psi.data[..., 0]) and not np.any(psi.data[..., -1])
    np.testing.assert_allclose(exterior_derivative(pn.A), exterior_derivative(p.A), atol=1e-11)
    with pytest.raises(ValueError, match="boundary_flatness"):
        normalize_normal_component(PotentialPair.from_arrays(g, A, None, Ball((0, 0, 0.5), 1.0), 1.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 3, allow_nan=False))
def test_smooth_step_range_and_symmetry(t):
    s = float(smooth_step(t))
    assert 0.0 <= s <= 1.0
    assert abs(s + float(smooth_step(1 - t)) - 1) < 1e-12


def test_trapezoid_weights_integrate_linear_exactly():
    w = trapezoid_weights(11, 0.1)
    x = np.arange(11) * 0.1
    assert abs(w @ (2 * x + 1) - 2.0) < 1e-14
