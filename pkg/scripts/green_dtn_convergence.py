"""Refinement study of the discrete Green identity and of DtN gauge invariance."""
import argparse

import numpy as np

from cgoslab.fields import PotentialPair, ScalarField, gauge_transform
from cgoslab.grid import Ball, Grid, SlabSpec
from cgoslab.potentials import make_pair, radius2
from cgoslab.slabsolver import BoundaryDatum, dtn_apply, green_check


def smooth(g, rng, modes):
    X = g.mesh()
    out = 0
    for _ in range(modes):
        k = rng.uniform(-2, 2, 3)
        a = rng.standard_normal() + 1j * rng.standard_normal()
        out = out + a * np.exp(1j * sum(kj * xj for kj, xj in zip(k, X)))
    return np.broadcast_to(out, g.shape).copy()


def green(ns, seeds):
    print("Green identity: mean / max relative gap")
    means = []
    for n in ns:
        g = Grid((0, 0, 0), (1 / (n - 1),) * 3, (n,) * 3)
        gaps = []
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            u, v = ScalarField(g, smooth(g, rng, 3)), ScalarField(g, smooth(g, rng, 3))
            A = np.stack([smooth(g, rng, 2) for _ in range(3)])
            p = PotentialPair.from_arrays(g, A, smooth(g, rng, 2), Ball((0.5,) * 3, 2.0), 1.0)
            gaps.append(green_check(u, v, p)[2])
        means.append(np.mean(gaps))
        print(f"  n={n:4d}  {np.mean(gaps):.3e}  {np.max(gaps):.3e}")
    print(f"  slope {np.polyfit(np.log([1 / (n - 1) for n in ns]), np.log(means), 1)[0]:.2f}")


def dtn(ns):
    print("DtN gap between p and a gauge transform of p")
    spec = SlabSpec(L=1.0, R=1.0, center=(0, 0, 0.5), radius=0.3)
    gaps = []
    for n in ns:
        g = spec.grid((n, n, n))
        p = make_pair(g, spec.ball, 1.0, {"kind": "gaussian", "center": (0, 0, .5), "sigma": .1},
                      {"kind": "gaussian", "center": (0.05, 0, .5), "sigma": .1})
        psi = ScalarField(g, 0.5 * np.maximum(1 - radius2(g, (0, 0, 0.5)) / 0.16, 0) ** 4 + 0j)
        f = BoundaryDatum.from_function(g, lambda x, y: np.exp(-(x**2 + y**2) / 0.1))
        a = dtn_apply(p, 0, f).output
        b = dtn_apply(gauge_transform(p, psi, invariance=True), 0, f).output
        gaps.append(np.linalg.norm(a - b) / np.linalg.norm(a))
        print(f"  n={n:4d}  {gaps[-1]:.3e}")
    print(f"  slope {np.polyfit(np.log([1 / (n - 1) for n in ns]), np.log(gaps), 1)[0]:.2f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="25,49,97")
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    ns = [int(t) for t in args.sizes.split(",")]
    green(ns, args.seeds)
    dtn(ns)
