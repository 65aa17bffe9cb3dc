"""Six-case uniqueness verdict suite (equal, gauge, q, dA; both modes) against ground truth."""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from cgoslab.fields import ScalarField, VectorField, gauge_transform, gradient
from cgoslab.grid import SlabSpec
from cgoslab.pairing import first_quadrant_grid, uniqueness_verdict
from cgoslab.potentials import bump, gauge_bump, make_pair


def pairs(dx):
    spec = SlabSpec(L=1.0, R=1.5, center=(0, 0, 0.5), radius=0.45)
    g = spec.ball_box(spec.grid_for_spacing(dx))
    p1 = make_pair(g, spec.ball, 1.0, {"kind": "gaussian", "center": (0, 0, 0.5), "sigma": 0.1},
                   {"kind": "gaussian", "center": (0.05, 0, 0.5), "sigma": 0.12})
    psi = gauge_bump(g, (0, 0, 0.5), 0.35, 0.3)
    pg = gauge_transform(p1, psi, invariance=True)
    G = gradient(psi.data, g.spacing)
    pa = p1.with_fields(A=VectorField(g, p1.A.data + np.stack([-G[1], G[0], G[2]])), support=pg.support)
    pq = p1.with_fields(q=ScalarField(g, p1.q.data + 0.5 * bump(g, (0, 0.05, 0.5), 0.3)))
    return {"equal": (p1, p1, "t1"), "gauge": (p1, pg, "t1"), "q": (p1, pq, "t1"), "dA": (p1, pa, "t1"),
            "gauge+q t2": (p1, pg.with_fields(q=pq.q), "t2"), "dA t2": (p1, pa, "t2")}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dx", type=float, default=0.05)
    ap.add_argument("--xi-count", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="out/verdict_suite")
    args = ap.parse_args()
    xis = first_quadrant_grid(args.xi_count, 3.0, seed=0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name, (a, b, mode) in pairs(args.dx).items():
        t = time.perf_counter()
        rep = uniqueness_verdict(a, b, xis, mode=mode, threads=args.threads)
        th = rep.thresholds
        print(f"{name:12s} {rep.verdict:14s} truth {rep.ground_truth['verdict']:14s} "
              f"mag {rep.max_magnetic:.2e}/{th['magnetic']:.2e}"
              + ("" if rep.max_q is None else f" q {rep.max_q:.2e}/{th['q']:.2e}")
              + f"  {time.perf_counter() - t:.0f} s")
        summary[name] = {"verdict": rep.verdict, "truth": rep.ground_truth["verdict"], "agrees": rep.agrees,
                         "max_magnetic": rep.max_magnetic, "max_q": rep.max_q, "thresholds": th}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=float))
    print("all agree:", all(v["agrees"] for v in summary.values()))


if __name__ == "__main__":
    main()
