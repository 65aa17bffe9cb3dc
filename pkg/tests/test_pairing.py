import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cgoslab.cgo import adapt_pair, make_zeta_pair
from cgoslab.fields import ScalarField, gauge_transform, gradient
from cgoslab.grid import SlabSpec
from cgoslab.pairing import (PairingResult, check_mode, choose_mu, exp_difference_bound, extract_fourier,
                             first_quadrant_grid, gauge_potential, ground_truth, pairing_integral,
                             phase_products, richardson, uniqueness_verdict)
from cgoslab.potentials import bump, gauge_bump, make_pair
from cgoslab.reflectors import partial_cgo_gamma1, partial_cgo_gamma2

from conftest import GAUSS_A, GAUSS_Q

finite = st.floats(-30, 30, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite)
def test_exp_difference_inequality(a, b, c, d):
    lhs, rhs = exp_difference_bound(complex(a, b), complex(c, d))
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3), st.sampled_from(["t1", "t2"]))
def test_mu_chooser_is_admissible(xi, mode):
    xi = np.array(xi)
    assume(np.linalg.norm(xi) > 1e-3 and np.linalg.norm(xi[:2]) > 1e-4 * np.linalg.norm(xi))
    mu1, mu2 = choose_mu(xi, mode)
    M = np.stack([mu1, mu2])
    np.testing.assert_allclose(M @ M.T, np.eye(2), atol=1e-12)
    assert np.abs(M @ xi).max() < 1e-12 * max(1, np.linalg.norm(xi))
    check_mode(mu1, mu2, mode)
    if mode == "t1":
        assert mu2[-1] > 0
    else:
        assert mu2[-1] == 0 and mu1[-1] > 0


def test_mu_chooser_rejects_normal_xi():
    with pytest.raises(ValueError, match="parallel to e_n"):
        choose_mu((0, 0, 2.0))


def test_first_quadrant_grid():
    xs = first_quadrant_grid(50, 4.0, seed=3)
    assert xs.shape == (50, 3) and np.all(xs > 0)
    assert np.all(np.linalg.norm(xs, axis=1) <= 4.0 + 1e-12)
    assert np.all(xs[:, -1] / np.linalg.norm(xs, axis=1) <= 0.87)
    np.testing.assert_array_equal(xs, first_quadrant_grid(50, 4.0, seed=3))


def test_phase_products_closed_form():
    # x.zeta1 + x.conj(zeta2) = i h x.xi, and mirrored factors decay like e^{-2 mu2_n x_n/h}
    z1, z2 = make_zeta_pair((2, 0, 0), (0, 1, 0), (0, 0, 1), 0.1)
    pts = np.array([(0.5, 0.3, 0.2), (0.0, 0.0, 0.5)])
    pp = phase_products(z1, z2, "t1", pts, 1.0)
    np.testing.assert_allclose(pp["main"]["magnitude"], 1.0)
    np.testing.assert_allclose(pp["main"]["phase"], pts @ np.array([2, 0, 0]), atol=1e-12)
    np.testing.assert_allclose(pp["b1"]["magnitude"], np.exp(-2 * pts[:, 2] / 0.1), rtol=1e-12)
    np.testing.assert_allclose(pp["b3"]["magnitude"][1], np.exp(-20), rtol=1e-12)
    with pytest.raises(ValueError, match="mu2_n"):
        phase_products(z1, z2, "t2", pts, 1.0)


def test_richardson_recovers_polynomials():
    hs = np.array([0.4, 0.2, 0.1])
    c0, res = richardson(hs, 1.5 - 2j + 0.7 * hs)
    assert abs(c0 - (1.5 - 2j)) < 1e-13 and res < 1e-13
    c0, _ = richardson(hs, 3 + hs ** (2 / 3) - hs ** (4 / 3), order=2 / 3, terms=2)
    assert abs(c0 - 3) < 1e-12
    with pytest.raises(ValueError, match="ill-conditioned"):
        richardson([0.1], [1.0])


def test_pairing_result_validation():
    with pytest.raises(ValueError, match="strictly decreasing"):
        PairingResult((1, 0, 0), "t1", (0, 1, 0), (0, 0, 1), [(0.1, 0, 0), (0.2, 0, 0)], 0j, 0j, 0j, 0j, "magnetic")
    with pytest.raises(ValueError, match="finite"):
        PairingResult((1, 0, 0), "t1", (0, 1, 0), (0, 0, 1), [(0.1, 0, 0)], complex(np.nan), 0j, 0j, 0j, "magnetic")


def test_pairing_null_is_exact(smooth_pair):
    z1, z2 = adapt_pair(*make_zeta_pair((2, 0, 0), (0, 1, 0), (0, 0, 1), 0.2), smooth_pair.grid.spacing)
    u1 = partial_cgo_gamma2(smooth_pair, z1)
    u2 = partial_cgo_gamma1(smooth_pair, z2)
    assert pairing_integral(u1, u2, smooth_pair, smooth_pair) == (0j, 0j)
    r = extract_fourier(smooth_pair, smooth_pair, (2, 0.5, 1), h_list=(0.2, 0.1, 0.05))
    assert r.limit_estimate == 0 and all(a == 0 and b == 0 for _, a, b in r.h_sweep)


def test_gauge_potential_recovers_psi(small_grid):
    psi = gauge_bump(small_grid, (0, 0, 0.5), 0.35, 0.3)
    rec = gauge_potential(gradient(psi.data, small_grid.spacing), small_grid)
    assert np.abs(rec.data - psi.data).max() < 1e-12


def test_ground_truth_classes(slab, small_grid, smooth_pair):
    psi = gauge_bump(small_grid, (0, 0, 0.5), 0.35, 0.3)
    pg = gauge_transform(smooth_pair, psi, invariance=True)
    pq = smooth_pair.with_fields(q=ScalarField(small_grid, smooth_pair.q.data + bump(small_grid, (0, 0, 0.5), 0.3)))
    assert ground_truth(smooth_pair, smooth_pair)["verdict"] == "equal (dA, q)"
    assert ground_truth(smooth_pair, pg)["verdict"] == "equal (dA, q)"
    assert ground_truth(smooth_pair, pq)["verdict"] == "q differs"
    G = gradient(psi.data, small_grid.spacing)
    pa = smooth_pair.with_fields(A=type(smooth_pair.A)(small_grid, smooth_pair.A.data + np.stack([-G[1], G[0], G[2]])),
                                 support=pg.support)
    assert ground_truth(smooth_pair, pa)["verdict"] == "dA differs"


def test_q_sample_matches_gaussian_transform():
    # A = 0: the limit of I2 is F[q1 - q2](xi) with an analytic Gaussian oracle
    spec = SlabSpec(L=1.0, R=2.0, center=(0, 0, 0.5), radius=0.6)
    g = spec.ball_box(spec.grid_for_spacing(0.04))
    c, sig = np.array([0, 0, 0.5]), 0.12
    p2 = make_pair(g, spec.ball, 1.0, None, {"kind": "gaussian", "center": (0.1, 0, 0.45), "sigma": 0.15})
    p1 = make_pair(g, spec.ball, 1.0, None, [{"kind": "gaussian", "center": (0.1, 0, 0.45), "sigma": 0.15},
                                              {"kind": "gaussian", "center": tuple(c), "sigma": sig}])
    xi = np.array([1.5, 1.0, 1.2])
    r = extract_fourier(p1, p2, xi, h_list=(0.1, 0.05), extrapolate=False)
    F = (2 * np.pi * sig**2) ** 1.5 * np.exp(-sig**2 * xi @ xi / 2) * np.exp(1j * c @ xi)
    assert abs(r.q_limit - F) / abs(F) < 0.02
    assert r.kind == "electric" and r.fourier_sample == r.q_limit
    assert abs(r.oracle["q"] - F) / abs(F) < 1e-3


def test_magnetic_sample_tracks_amplitude_oracle(slab, small_grid, smooth_pair):
    G = gradient(gauge_bump(small_grid, (0, 0, 0.5), 0.35, 0.3).data, small_grid.spacing)
    pa = smooth_pair.with_fields(A=type(smooth_pair.A)(small_grid, smooth_pair.A.data + np.stack([-G[1], G[0], G[2]])),
                                 support=smooth_pair.support + (slab.ball,))
    r = extract_fourier(smooth_pair, pa, (1.5, 0.5, 0.8))
    assert r.kind == "magnetic"
    ref = r.oracle["magnetic"]
    # h >= 0.05 leaves a 10-20% extrapolation error at this resolution
    assert abs(r.magnetic_sample - ref) / abs(ref) < 0.3
    # oscillatory cross terms fall along the sweep
    cross = [abs(t["cross1"]) for t in r.terms]
    assert all(b < a for a, b in zip(cross, cross[1:]))


def test_verdict_requires_admissible_grid(smooth_pair):
    with pytest.raises(ValueError, match="empty admissible grid"):
        uniqueness_verdict(smooth_pair, smooth_pair, np.array([[0.0, 0.0, 1.0]]))
