import numpy as np
import pytest

from cgoslab.cgo import adapt_pair, make_zeta_pair
from cgoslab.fields import PotentialPair, ScalarField, apply_operator
from cgoslab.grid import Ball
from cgoslab.reflectors import (ReflectedDomain, extend_even_odd, partial_cgo_gamma1, partial_cgo_gamma2,
                                partial_cgo_same_plane)


def _frequencies(mode, grid, h=0.2):
    if mode == "t1":
        z = make_zeta_pair((2, 0, 0), (0, 1, 0), (0, 0, 1), h)
    else:
        z = make_zeta_pair((2, 0, 0), (0, 0, 1), (0, 1, 0), h)
    return adapt_pair(*z, grid.spacing)


def test_extension_symmetry_is_exact(smooth_pair):
    for mirror in ("gamma2", "gamma1"):
        pe = extend_even_odd(smooth_pair, mirror)
        A, q = pe.A.data, pe.q.data
        assert np.array_equal(q, q[..., ::-1])
        assert np.array_equal(A[0], A[0][..., ::-1]) and np.array_equal(A[1], A[1][..., ::-1])
        assert np.array_equal(A[2], -A[2][..., ::-1])
        dom = ReflectedDomain.build(smooth_pair.grid, mirror, 1.0)
        assert np.array_equal(dom.restrict(q), smooth_pair.q.data)
        assert np.array_equal(dom.restrict(A), smooth_pair.A.data)


def test_extension_needs_vanishing_normal_trace(small_grid, smooth_pair):
    A = smooth_pair.A.data.copy()
    A[2][..., 0] = 0.1
    bad = PotentialPair.from_arrays(small_grid, A, None, Ball((0, 0, 0.5), 0.6), 1.0)
    with pytest.raises(ValueError, match="normalize first"):
        extend_even_odd(bad, "gamma2")


@pytest.mark.parametrize("mode", ["t1", "t2"])
def test_partial_solutions_vanish_on_their_planes(mode, smooth_pair):
    z1, z2 = _frequencies(mode, smooth_pair.grid)
    a = partial_cgo_gamma2(smooth_pair, z1, full=True)
    b = (partial_cgo_gamma1 if mode == "t1" else partial_cgo_same_plane)(smooth_pair, z2)
    assert np.abs(a.u.data[..., 0]).max() < 1e-13
    assert np.abs(b.data[..., -1 if mode == "t1" else 0]).max() < 1e-13
    # u~ - u~ o R solves the extended equation because the extension is symmetric
    pe, ut = a.potential, a.solution.u
    refl = apply_operator(ScalarField(ut.grid, ut.data[..., ::-1]), pe).data
    s = (slice(1, -1),) * 3
    assert np.abs(refl[s]).max() < 1e-8 * np.abs(ut.data).max()
    # and restricts to a solution in the slab
    Lu = apply_operator(a.u, smooth_pair).data
    assert np.abs(Lu[s]).max() < 1e-8 * np.abs(a.u.data).max()


def test_role_and_constraint_checks(smooth_pair):
    z1, z2 = _frequencies("t1", smooth_pair.grid)
    with pytest.raises(ValueError, match="role"):
        partial_cgo_gamma2(smooth_pair, z2)
    with pytest.raises(ValueError, match="mu2_n = 0"):
        partial_cgo_same_plane(smooth_pair, z2)
    with pytest.raises(ValueError, match="mirror"):
        ReflectedDomain.build(smooth_pair.grid, "gamma3", 1.0)
