"""Command-line runner: scenario-driven verdicts, sweeps and oracle suites.

Exit status: 0 on success, 2 on usage or schema errors, 3 when a
precondition (admissibility, grid, frequency constraints) fails, 1 when a
self-test check fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import __version__
from .cgo import SolverError, build_cgo, make_zeta_pair
from .fieldio import write_field, write_pair
from .fields import ScalarField, d1
from .grid import Grid
from .pairing import (_prepare, amplitude_oracle, choose_mu, extract_fourier, normalize_mode,
                      uniqueness_verdict)
from .scenario import ScenarioError, build_pairs, default_scenario, load_scenario, provenance
from .slabsolver import BoundaryDatum, check_admissible, dtn_apply

__all__ = ["main", "build_parser", "cauchy_oracle_suite", "selftest_checks"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# output helpers (single writer per file, deterministic encoding)


def _write_json(path: Path, obj: dict, prov: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(obj)
    body["provenance"] = prov
    path.write_text(json.dumps(body, indent=1, sort_keys=True, allow_nan=True) + "\n")
    return path


def _write_csv(path: Path, header: list, rows: list, prov: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario_hash={prov['scenario_hash']} version={prov['version']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return path


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _scenario(args):
    path = getattr(args, "scenario_pos", None) or args.scenario
    scale = args.grid_scale
    if path is None:
        sc = default_scenario()
        data = sc.data
    else:
        sc = load_scenario(path, grid_scale=scale)
        data = sc.data
    if args.seed is not None:
        data = dict(data, seed=args.seed)
    return load_scenario(sc.path, data=data, grid_scale=scale) if (args.seed is not None or path is None) \
        else sc


def _preconditions(sc, p1, p2) -> None:
    k = sc.numerics().k
    for name, p in (("p1", p1), ("p2", p2)):
        adm = check_admissible(p, k)
        if not adm["admissible"]:
            raise ValueError(f"inadmissible k={k} for {name}: condition estimate {adm['cond_estimate']:.3e}")
    xis = sc.xi_grid()
    ok = 0
    for xi in xis:
        try:
            mu1, mu2 = choose_mu(xi, sc.mode)
            for h in sc.h_list:
                make_zeta_pair(xi, mu1, mu2, h)
            ok += 1
        except ValueError:
            pass
    if ok == 0:
        raise ValueError("empty admissible grid")


# ---------------------------------------------------------------------------
# subcommands


def _verdict(args, snapshots: bool):
    sc = _scenario(args)
    prov = provenance(sc)
    p1, p2 = build_pairs(sc)
    _preconditions(sc, p1, p2)
    out = sc.output_dir(args.out)
    rep = uniqueness_verdict(p1, p2, sc.xi_grid(), sc.mode, sc.h_list, sc.numerics(),
                             probe_points=sc.option("probe_points", 3), threads=args.threads,
                             rel_floor=sc.option("rel_floor", 1e-8), order=sc.option("order", 1.0))
    body = rep.to_json()
    body["scenario"] = sc.data
    _write_json(out / "report.json", body, prov)
    formats = sc.data.get("outputs", {}).get("formats", ["json", "csv"])
    if "csv" in formats:
        rows = []
        for i, xi in enumerate(rep.xi_grid):
            m = rep.magnetic_samples[i]
            qv = rep.q_samples[i] if rep.q_samples is not None else np.nan
            rows.append([i, *xi, float(np.linalg.norm(xi)), m.real, m.imag, np.real(qv), np.imag(qv)])
        _write_csv(out / "samples.csv", ["index", *[f"xi{j + 1}" for j in range(len(rep.xi_grid[0]))], "xi_norm",
                                          "magnetic_re", "magnetic_im", "q_re", "q_im"], rows, prov)
        rows = []
        for stage, results in (("magnetic", rep.results), ("q", rep.q_results or [])):
            if stage == "q" and results is rep.results:
                continue
            for i, r in enumerate(results):
                for h, I1, I2 in r.h_sweep:
                    rows.append([stage, i, h, I1.real, I1.imag, I2.real, I2.imag])
        _write_csv(out / "sweeps.csv", ["stage", "index", "h", "I1_re", "I1_im", "I2_re", "I2_im"], rows, prov)
        if rep.q_samples is not None:
            c1, c2 = _prepare(p1, p2)
            rows = []
            for i, (xi, r) in enumerate(zip(rep.xi_grid, rep.q_results)):
                orc = amplitude_oracle(c1, c2, xi, r.mu1, r.mu2, sc.mode)["q"]
                qv = rep.q_samples[i]
                rows.append([i, *xi, float(np.linalg.norm(xi)), qv.real, qv.imag, orc.real, orc.imag])
            _write_csv(out / "spectrum.csv", ["index", *[f"xi{j + 1}" for j in range(len(rep.xi_grid[0]))],
                                              "xi_norm", "recovered_re", "recovered_im", "quadrature_re",
                                              "quadrature_im"], rows, prov)
    if snapshots and sc.data.get("outputs", {}).get("snapshots", True):
        write_pair(out / "fields" / "p1", p1)
        write_pair(out / "fields" / "p2", p2)
    print(f"verdict: {rep.verdict} (ground truth: {rep.ground_truth['verdict']}); "
          f"max magnetic {rep.max_magnetic:.3e} / threshold {rep.thresholds['magnetic']:.3e}"
          + ("" if rep.max_q is None else f"; max q {rep.max_q:.3e} / threshold {rep.thresholds['q']:.3e}"))
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


def cmd_run(args):
    return _verdict(args, snapshots=True)


def cmd_verdict(args):
    return _verdict(args, snapshots=False)


def cmd_pair(args):
    sc = _scenario(args)
    prov = provenance(sc)
    p1, p2 = build_pairs(sc)
    _preconditions(sc, p1, p2)
    mode = normalize_mode(args.mode or sc.mode)
    xi = np.asarray(_floats(args.xi))
    hs = _floats(args.h) if args.h else list(sc.h_list)
    r = extract_fourier(p1, p2, xi, mode=mode, h_list=hs, numerics=sc.numerics(),
                        extrapolate=len(hs) >= 3, order=sc.option("order", 1.0))
    out = sc.output_dir(args.out)
    _write_json(out / "pair.json", r.to_json(), prov)
    print(f"xi={xi.tolist()} mode={mode} kind={r.kind} fourier_sample={r.fourier_sample:.6e}")
    for h, I1, I2 in r.h_sweep:
        print(f"  h={h:<6g} I1={I1:.6e} I2={I2:.6e} h(I1+I2)={h * (I1 + I2):.6e}")
    if r.oracle:
        print(f"  quadrature: magnetic={r.oracle['magnetic']:.6e} q={r.oracle['q']:.6e}")
    return EXIT_OK


def cmd_cgo_sweep(args):
    sc = _scenario(args)
    prov = provenance(sc)
    p1, _ = build_pairs(sc)
    hs = _floats(args.h)
    xi = np.asarray(_floats(args.xi))
    mu1, mu2 = choose_mu(xi, "t1")
    num = sc.numerics()
    rows = []
    print(f"{'h':>7} {'eps':>8} {'||r||':>11} {'||hDr||':>11} {'H1_scl':>11} {'defect':>10} {'iters':>6}")
    for h in hs:
        z, _ = make_zeta_pair(xi, mu1, mu2, h)
        t0 = time.perf_counter()
        s = build_cgo(p1, z, numerics=num)
        n = s.norms
        rows.append([h, s.eps, n["l2"], n["hd"], n["h1_scl"], n["defect"], s.info.get("iters", 0)])
        print(f"{h:7g} {s.eps:8.4f} {n['l2']:11.4e} {n['hd']:11.4e} {n['h1_scl']:11.4e} {n['defect']:10.2e} "
              f"{s.info.get('iters', 0):6d}  ({time.perf_counter() - t0:.1f}s)")
    norms = np.array([r[4] for r in rows])
    slope = None
    if len(hs) >= 2 and np.all(norms > 0):
        slope = float(np.polyfit(np.log(hs), np.log(norms), 1)[0])
        print(f"slope of log ||r||_H1_scl vs log h: {slope:.3f}")
    out = sc.output_dir(args.out)
    _write_csv(out / "cgo_sweep.csv", ["h", "eps", "l2", "hd", "h1_scl", "defect", "iters"], rows, prov)
    _write_json(out / "cgo_sweep.json", {"xi": xi.tolist(), "rows": rows, "slope": slope}, prov)
    return EXIT_OK


def cauchy_oracle_suite(sizes=(64, 128, 256, 512), half_width: float = 6.0) -> dict:
    """Planar Cauchy transform against closed forms.

    ``N = d1 + i d2``.  Gaussian: ``N^{-1}(-2 z e^{-|z|^2}) = e^{-|z|^2}``.
    Disk of radius 1: ``N^{-1} 1_D = conj(z)/2`` inside, ``1/(2 z)`` outside.
    Also reports the forward residual ``||N N^{-1} f - f|| / ||f||`` with
    the package stencil.
    """
    from .mollify_dbar import cauchy_2d
    rows = []
    for n in sizes:
        x = np.linspace(-half_width, half_width, n)
        dx = x[1] - x[0]
        X, Y = np.meshgrid(x, x, indexing="ij")
        Z = X + 1j * Y
        exact = np.exp(-np.abs(Z) ** 2)
        f = -2 * Z * exact
        u = cauchy_2d(f, dx, dx)
        err = float(np.linalg.norm(u - exact) / np.linalg.norm(exact))
        Nu = d1(u, 0, dx) + 1j * d1(u, 1, dx)
        c = (slice(1, -1), slice(1, -1))
        fwd = float(np.linalg.norm((Nu - f)[c]) / np.linalg.norm(f[c]))
        disk = (np.abs(Z) <= 1.0).astype(complex)
        Zs = np.where(Z == 0, 1.0, Z)
        dex = np.where(np.abs(Z) <= 1.0, np.conj(Z) / 2, 1 / (2 * Zs))
        ud = cauchy_2d(disk, dx, dx)
        inner = np.abs(Z) <= 3.0
        derr = float(np.linalg.norm((ud - dex)[inner]) / np.linalg.norm(dex[inner]))
        rows.append({"n": n, "dx": dx, "gaussian_rel_l2": err, "forward_residual": fwd, "disk_rel_l2": derr})
    out = {"rows": rows}
    if len(rows) >= 2:
        lg = np.log([r["dx"] for r in rows])
        for key in ("gaussian_rel_l2", "forward_residual", "disk_rel_l2"):
            out[f"slope_{key}"] = float(np.polyfit(lg, np.log([r[key] for r in rows]), 1)[0])
    return out


def cmd_dbar_test(args):
    sizes = tuple(int(t) for t in _floats(args.sizes))
    res = cauchy_oracle_suite(sizes)
    print(f"{'n':>5} {'gaussian':>11} {'forward':>11} {'disk':>11}")
    for r in res["rows"]:
        print(f"{r['n']:5d} {r['gaussian_rel_l2']:11.3e} {r['forward_residual']:11.3e} {r['disk_rel_l2']:11.3e}")
    for k, v in res.items():
        if k.startswith("slope"):
            print(f"{k}: {v:.3f}")
    if args.out:
        prov = {"scenario_hash": "none", "version": __version__, "grid_scale": 1.0}
        _write_json(Path(args.out) / "dbar_test.json", res, prov)
    ok = res["rows"][-1]["gaussian_rel_l2"] < 1e-3 if res["rows"][-1]["n"] >= 512 else True
    return EXIT_OK if ok else EXIT_FAIL


def _boundary_data(grid: Grid, gamma: np.ndarray, count: int, seed: int):
    """Seeded smooth data supported in ``gamma`` (a disc on the top face)."""
    rng = np.random.default_rng(seed)
    X = np.meshgrid(*grid.axes()[:-1], indexing="ij")
    out = []
    for _ in range(count):
        f = np.zeros(X[0].shape, complex)
        for _ in range(3):
            kv = rng.uniform(-3, 3, len(X))
            ph = sum(kj * xj for kj, xj in zip(kv, X))
            f += rng.normal() * np.exp(1j * ph)
        out.append(BoundaryDatum(f * gamma, gamma))
    return out


def cmd_dtn_export(args):
    sc = _scenario(args)
    prov = provenance(sc)
    slab = sc.slab()
    data = dict(sc.data)
    data["grid"] = dict(data.get("grid", {}), crop_to_ball=False)
    full = load_scenario(sc.path, data=data, grid_scale=sc.grid_scale)
    p1, _ = build_pairs(full)
    g = p1.grid
    k = sc.numerics().k
    adm = check_admissible(p1, k)
    if not adm["admissible"]:
        raise ValueError(f"inadmissible k={k}: condition estimate {adm['cond_estimate']:.3e}")
    X = np.meshgrid(*g.axes()[:-1], indexing="ij")
    r = np.sqrt(sum((xj - cj) ** 2 for xj, cj in zip(X, slab.center[:-1])))
    reach = slab.radius + 0.5 * (slab.R - slab.radius)
    gamma = r <= reach
    face = "gamma2" if sc.mode == "theorem-1.1" else "gamma1"
    out = sc.output_dir(args.out) / "dtn"
    fgrid = Grid(g.origin[:-1], g.spacing[:-1], g.shape[:-1])
    entries = []
    for i, f in enumerate(_boundary_data(g, gamma, args.count, sc.seed)):
        s = dtn_apply(p1, k, f, face)
        a = write_field(out / f"input_{i:03d}", ScalarField(fgrid, f.f))
        b = write_field(out / f"output_{i:03d}", ScalarField(fgrid, s.output))
        entries.append({"input": a.name, "output": b.name, "face": s.face, "k": k, "geometry": s.geometry})
        print(f"sample {i}: face={s.face} max|N f|={np.abs(s.output).max():.4e}")
    write_pair(out / "potential", p1)
    manifest = {"samples": entries, "gamma1_radius": reach, "potential": "potential.json",
                "admissibility": adm, "note": "admissibility is a discrete invertibility surrogate"}
    _write_json(out / "manifest.json", manifest, prov)
    print(f"manifest: {out / 'manifest.json'}")
    return EXIT_OK


def selftest_checks() -> list:
    """Quick oracle checks; returns ``(name, passed, detail)`` tuples."""
    from .fields import PotentialPair
    from .grid import Ball, SlabSpec
    from .pairing import exp_difference_bound, pairing_integral, phase_products
    from .potentials import make_pair
    from .reflectors import partial_cgo_gamma2
    from .slabsolver import green_check
    from .cgo import adapt_pair
    checks = []
    rng = np.random.default_rng(0)

    worst = 0.0
    for _ in range(200):
        xi = rng.normal(size=3) * 3
        mu1, mu2 = choose_mu(xi, "t1")
        h = rng.uniform(0.01, 0.9) * 2 / np.linalg.norm(xi)
        z1, z2 = make_zeta_pair(xi, mu1, mu2, h)
        worst = max(worst, abs(z1.zeta @ z1.zeta), abs(z2.zeta @ z2.zeta),
                    np.abs(z1.zeta + np.conj(z2.zeta) - 1j * h * xi).max())
    checks.append(("zeta algebra", worst < 1e-12, f"max invariant error {worst:.2e}"))

    res = cauchy_oracle_suite((64, 128))
    e = res["rows"][-1]["gaussian_rel_l2"]
    checks.append(("cauchy gaussian oracle", e < 2e-2 and res["slope_gaussian_rel_l2"] > 1.5,
                   f"rel L2 {e:.2e} at n=128, slope {res['slope_gaussian_rel_l2']:.2f}"))

    z1, z2 = make_zeta_pair((2, 0, 0), (0, 1, 0), (0, 0, 1), 0.1)
    pp = phase_products(z1, z2, "t1", [(0.5, 0.3, 0.2), (0.0, 0.0, 0.5)], 1.0)
    ok = (abs(pp["b1"]["phase"][0] - 1.0) < 1e-12 and abs(pp["b1"]["magnitude"][1] / np.exp(-10) - 1) < 1e-12
          and abs(pp["b3"]["magnitude"][1] / np.exp(-20) - 1) < 1e-12)
    checks.append(("phase products", ok, "b1 = 1, cross e^-10, double e^-20"))

    z = rng.normal(size=1000) * 3 + 1j * rng.normal(size=1000) * 3
    w = rng.normal(size=1000) * 3 + 1j * rng.normal(size=1000) * 3
    lhs, rhs = exp_difference_bound(z, w)
    checks.append(("exp difference inequality", bool(np.all(rhs - lhs >= -1e-12 * rhs)),
                   f"min slack {float(np.min(rhs - lhs)):.2e}"))

    spec = SlabSpec(L=1.0, R=1.5, center=(0, 0, 0.5), radius=0.45)
    g = spec.ball_box(spec.grid((31, 31, 11)))
    p = make_pair(g, spec.ball, 1.0, {"kind": "gaussian", "center": (0, 0, 0.5), "sigma": 0.12},
                  {"kind": "gaussian", "center": (0, 0, 0.5), "sigma": 0.12})
    z1, z2 = adapt_pair(*make_zeta_pair((2, 0, 0), (0, 1, 0), (0, 0, 1), 0.3), g.spacing)
    u = partial_cgo_gamma2(p, z1)
    vanish = float(np.abs(u.data[..., 0]).max())
    checks.append(("reflection vanishing", vanish < 1e-13, f"max |u1| on x_n=0: {vanish:.1e}"))

    I1, I2 = pairing_integral(u, u, p, p)
    checks.append(("pairing null", I1 == 0 and I2 == 0, f"I1={I1}, I2={I2}"))

    gb = Grid((0, 0, 0), (1 / 24,) * 3, (25, 25, 25))
    X = gb.mesh()
    uu = np.exp(1j * (X[0] + 2 * X[1])) * (1 + X[2]) + 0 * X[0]
    vv = np.cos(X[0] - X[2]) * np.exp(X[1]) + 0j
    Ab = np.stack([np.broadcast_to(np.sin(X[1]) + 0j, gb.shape), np.broadcast_to(X[2] + 0j, gb.shape),
                   np.broadcast_to(0.5 * np.cos(X[0]) + 0j, gb.shape)])
    pb = PotentialPair.from_arrays(gb, Ab, np.broadcast_to(1 + X[0] * X[1] + 0j, gb.shape).copy(),
                                   Ball((0.5, 0.5, 0.5), 2.0), 1.0)
    _, _, gap = green_check(ScalarField(gb, np.broadcast_to(uu, gb.shape).copy()),
                            ScalarField(gb, np.broadcast_to(vv, gb.shape).copy()), pb)
    checks.append(("green identity", gap < 5e-3, f"relative gap {gap:.2e} at 25^3"))

    try:
        load_scenario(data={"slab": {"L": -1}})
        checks.append(("schema rejection", False, "malformed scenario accepted"))
    except ScenarioError as exc:
        checks.append(("schema rejection", True, str(exc)))
    return checks


def cmd_selftest(args):
    checks = selftest_checks()
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--out", help="output directory (overrides the scenario)")
    common.add_argument("--threads", type=int, default=1, help="FFT workers and parallel xi points")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--grid-scale", type=float, default=1.0, help="uniform refinement multiplier")
    ap = argparse.ArgumentParser(prog="cgoslab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"cgoslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, fn, helptext in (("run", cmd_run, "verdict, CSV sweeps and field snapshots"),
                               ("verdict", cmd_verdict, "verdict report over the full xi grid")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("scenario_pos", nargs="?", metavar="SCENARIO")
        s.set_defaults(func=fn)
    s = sub.add_parser("pair", parents=[common], help="single-xi pairing result")
    s.add_argument("--xi", default="2,0,0")
    s.add_argument("--mode", choices=["t1", "t2", "theorem-1.1", "theorem-1.2"])
    s.add_argument("--h", help="comma-separated, strictly decreasing")
    s.set_defaults(func=cmd_pair)
    s = sub.add_parser("cgo-sweep", parents=[common], help="remainder decay table")
    s.add_argument("--h", default="0.4,0.2,0.1,0.05")
    s.add_argument("--xi", default="2,0,0")
    s.set_defaults(func=cmd_cgo_sweep)
    s = sub.add_parser("dbar-test", parents=[common], help="Cauchy-transform oracle suite")
    s.add_argument("--sizes", default="64,128,256,512")
    s.set_defaults(func=cmd_dbar_test)
    s = sub.add_parser("dtn-export", parents=[common], help="synthetic DtN dataset")
    s.add_argument("--count", type=int, default=4)
    s.set_defaults(func=cmd_dtn_export)
    s = sub.add_parser("selftest", parents=[common], help="quick oracle checks")
    s.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    workers = sfft.set_workers(args.threads) if args.threads and args.threads > 1 else nullcontext()
    try:
        with workers:
            return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SolverError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
