import sys

import numpy as np
import pytest

from cgoslab.grid import SlabSpec
from cgoslab.potentials import make_pair

GAUSS_A = {"kind": "gaussian", "center": (0.0, 0.0, 0.5), "sigma": 0.1}
GAUSS_Q = {"kind": "gaussian", "center": (0.05, 0.0, 0.5), "sigma": 0.12}


@pytest.fixture(scope="session")
def slab():
    return SlabSpec(L=1.0, R=1.5, center=(0.0, 0.0, 0.5), radius=0.45)


@pytest.fixture(scope="session")
def small_grid(slab):
    return slab.ball_box(slab.grid((61, 61, 21)))


@pytest.fixture(scope="session")
def smooth_pair(slab, small_grid):
    return make_pair(small_grid, slab.ball, 1.0, GAUSS_A, GAUSS_Q)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_smooth(grid, rng, modes=3, kmax=2.0):
    """Sum of a few random complex plane waves with |k_j| <= kmax."""
    X = grid.mesh()
    out = 0
    for _ in range(modes):
        k = rng.uniform(-kmax, kmax, grid.ndim)
        a = rng.standard_normal() + 1j * rng.standard_normal()
        out = out + a * np.exp(1j * (sum(kj * xj for kj, xj in zip(k, X)) + rng.uniform(0, 2 * np.pi)))
    return np.broadcast_to(out, grid.shape).copy()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s[6:9]):
            terminalreporter.write_line(line)
