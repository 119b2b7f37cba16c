"""Command-line front end: eval, sweep, bench, alpha-study, tune.

Output is CSV with ``#``-prefixed metadata lines.  With the same arguments
and seed a rerun produces identical bytes; wall-clock timings are only
written when ``--timings`` is given.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .errors import EwaldError, InputError
from .estimate import SystemMoments, tune
from .geometry import PointCloud, read_points_csv
from .kernels import KernelParams
from .studies import (
    alpha_study,
    alpha_threshold,
    bench,
    fit_exponent,
    grid_targets,
    random_cloud,
    sweep_kspace,
    sweep_real,
)
from .summation import ewald_sum, ewald_sum_ongrid, resolve_settings

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_INPUT = 3

_SETTINGS = {"per": "periodic", "free": "free"}


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _floats(text: str) -> list[float]:
    """'a,b,c' or 'lo:hi:n' (n points, inclusive)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        lo, hi, n = text.split(":")
        n = int(n)
        return [] if n <= 0 else [float(v) for v in np.linspace(float(lo), float(hi), n)]
    return [float(v) for v in text.split(",") if v.strip()]


class _Writer:
    def __init__(self, meta: dict):
        self.buf = io.StringIO()
        for k in sorted(meta):
            self.buf.write(f"# {k}={_fmt(meta[k])}\n")
        self.csv = csv.writer(self.buf, lineterminator="\n")

    def header(self, cols):
        self.csv.writerow(cols)

    def row(self, vals):
        self.csv.writerow([_fmt(v) for v in vals])

    def comment(self, key, value):
        self.buf.write(f"# {key}={_fmt(value)}\n")

    def flush(self, out: Optional[str]):
        text = self.buf.getvalue()
        if out in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(out, "w", newline="") as fh:
                fh.write(text)


def _base_meta(args) -> dict:
    return {
        "command": args.command,
        "kernel": args.kernel,
        "setting": _SETTINGS[args.setting],
        "alpha": args.alpha,
        "box": args.box,
        "tol": args.tol,
        "n": args.n,
        "seed": args.seed,
        "window_p": args.window_p,
    }


def _sources(args, rng: np.random.Generator) -> PointCloud:
    if args.sources:
        closed = _SETTINGS[args.setting] == "free"
        return read_points_csv(args.sources, domain=(0.0, args.box), closed=closed)
    return random_cloud(args.n, args.box, args.seed, rng)


def _parse_targets(spec: str, box: float, rng: np.random.Generator, n: int):
    """Returns (positions, lattice size or None)."""
    if spec == "random":
        return rng.uniform(0.0, box, (n, 2)), None
    if spec.startswith("grid:"):
        dims = spec[5:].lower().split("x")
        if len(dims) != 2 or not all(d.isdigit() for d in dims):
            raise InputError(f"bad grid target spec {spec!r}; expected grid:MxM")
        a, b = int(dims[0]), int(dims[1])
        if a != b or a <= 0:
            raise InputError("grid targets must be square (grid:MxM with M > 0)")
        return grid_targets(a, box), a
    if spec.startswith("file:"):
        return read_points_csv(spec[5:], domain=(0.0, box)).positions, None
    raise InputError(f"unknown target spec {spec!r}")


def cmd_eval(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    cloud = _sources(args, rng)
    targets, lattice = _parse_targets(args.targets, args.box, rng, args.n)
    setting = _SETTINGS[args.setting]
    kernel = args.kernel.upper()
    st = resolve_settings(cloud, args.alpha, args.box, setting, args.tol, (kernel,),
                          r_c=args.rc, xi=args.xi, M=args.grid_size, p=args.window_p)
    explicit_M = args.grid_size is not None
    if args.ongrid:
        if lattice is None:
            raise InputError("--ongrid needs --targets grid:MxM")
        res = ewald_sum_ongrid(cloud, lattice, args.alpha, args.box, st, kernel, M_explicit=explicit_M)
    else:
        res = ewald_sum(cloud, targets, args.alpha, args.box, st, kernel, M_explicit=explicit_M)
    meta = _base_meta(args)
    meta.update(targets=args.targets, n_sources=len(cloud), n_targets=len(targets),
                r_c=st.r_c, xi=st.xi, k_inf=st.k_inf, M=st.M, ongrid=bool(args.ongrid))
    if res.plan is not None:
        meta.update(M_core=res.plan.M_core, n_pad=res.plan.n_pad, L_tilde=res.plan.L_tilde, R=res.plan.R)
    w = _Writer(meta)
    w.header(["x", "y", "value"])
    for (x, y), v in zip(targets, res.values):
        w.row([x, y, v])
    if args.timings:
        for k in sorted(res.timings):
            w.comment(f"time_{k}", res.timings[k])
    w.flush(args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    cloud = _sources(args, rng)
    targets = rng.uniform(0.0, args.box, (args.n, 2))
    xis = _floats(args.xi_list)
    values = _floats(args.range)
    kernel = args.kernel.upper()
    if args.part == "real":
        rows = sweep_real(cloud, targets, args.alpha, args.box, xis, values, kernel)
        col = "r_c"
    else:
        rows = sweep_kspace(cloud, targets, args.alpha, args.box, xis, values, kernel)
        col = "k_inf"
    meta = _base_meta(args)
    meta.update(part=args.part, xi_list=args.xi_list, range=args.range)
    w = _Writer(meta)
    w.header(["xi", col, "measured_rms", "estimate"])
    for r in rows:
        w.row([r.xi, r.value, r.measured, r.estimate])
    w.flush(args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    ns = [int(v) for v in _floats(args.sizes)]
    setting = _SETTINGS[args.setting]
    rows = bench(ns, args.box, args.alpha, args.seed, setting, args.kernel.upper(), args.tol,
                 args.neighbours, args.window_p, args.repeats)
    meta = _base_meta(args)
    meta.update(sizes=args.sizes, neighbours=args.neighbours)
    w = _Writer(meta)
    stages = ["real", "precompute", "spread", "fft", "scale", "ifft", "gather", "total"]
    w.header(["N", "r_c", "xi", "M"] + [f"t_{s}" for s in stages])
    for r in rows:
        w.row([r.N, r.r_c, r.xi, r.M] + [r.timings.get(s, 0.0) for s in stages])
    e = fit_exponent([r.N for r in rows], [r.timings["total"] for r in rows])
    if e is not None:
        w.comment("exponent_vs_N", e)
        w.comment("exponent_vs_NlogN", fit_exponent([r.N for r in rows],
                                                    [r.timings["total"] for r in rows], nlogn=True))
    w.flush(args.out)
    return EXIT_OK


def cmd_alpha_study(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    cloud = _sources(args, rng)
    scaled = _floats(args.range)
    rc = args.rc if args.rc is not None else 1.0
    rows = alpha_study(cloud, args.box, scaled, args.tol, rc, args.kernel.upper(), args.window_p)
    meta = _base_meta(args)
    meta.update(setting="free", range=args.range, r_c=rc)
    w = _Writer(meta)
    w.header(["alpha_L_over_2pi", "err_plain", "err_mollified", "gf_minus_gfr_at_0"])
    for r in rows:
        w.row([r.alpha_scaled, r.err_plain, r.err_mollified, r.multiplier_gap])
    th = alpha_threshold(rows)
    w.comment("threshold", th if th is not None else "none")
    w.flush(args.out)
    return EXIT_OK


def cmd_tune(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    cloud = _sources(args, rng)
    setting = _SETTINGS[args.setting]
    rc = args.rc
    if rc is None:
        rc = math.sqrt(args.neighbours * args.box**2 / (math.pi * max(len(cloud), 1)))
    res = tune(args.tol, rc, KernelParams(args.alpha, 1.0, args.box),
               SystemMoments.from_cloud(cloud, args.box), setting, (args.kernel.upper(),))
    meta = _base_meta(args)
    w = _Writer(meta)
    w.header(["r_c", "xi", "k_inf", "M", "est_real", "est_kspace"])
    w.row([res.r_c, res.xi, res.k_inf, res.M, res.estimates["real"], res.estimates["kspace"]])
    for i, d in enumerate(res.diagnostics):
        w.comment(f"diagnostic_{i}", d)
    w.flush(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kernel", choices=["g", "h"], default="g")
    common.add_argument("--setting", choices=["per", "free"], default="per")
    common.add_argument("--alpha", type=float, default=1.0)
    common.add_argument("--box", type=float, default=2 * math.pi)
    common.add_argument("--tol", type=float, default=1e-12)
    common.add_argument("--n", type=int, default=500)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--rc", type=float)
    common.add_argument("--xi", type=float)
    common.add_argument("--grid-size", type=int, help="grid cells across the box (M)")
    common.add_argument("--window-p", type=int, default=24)
    common.add_argument("--targets", default="random", help="random | grid:MxM | file:PATH")
    common.add_argument("--sources", help="CSV with x,y[,f | ,f1,f2]; default: synthetic")
    common.add_argument("--out", help="output CSV path (default stdout)")
    common.add_argument("--neighbours", type=float, default=30.0,
                        help="mean neighbour count used when r_c is not given")

    p = argparse.ArgumentParser(prog="yukawa-ewald", description="Spectral Ewald sums for K0 / K1 kernels in 2D.")
    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("eval", parents=[common], help="evaluate sums at targets")
    e.add_argument("--ongrid", action="store_true", help="evaluate the k-space part directly on the target lattice")
    e.add_argument("--timings", action="store_true", help="append per-stage wall times")
    s = sub.add_parser("sweep", parents=[common], help="measured truncation error vs estimate")
    s.add_argument("--part", choices=["real", "kspace"], default="real")
    s.add_argument("--xi-list", default="3,5,10,15")
    s.add_argument("--range", default="0.2:3.0:15", help="r_c or k_inf values: a,b,c or lo:hi:n")
    b = sub.add_parser("bench", parents=[common], help="timings with constant neighbour count")
    b.add_argument("--sizes", default="1000,4000,16000,64000")
    b.add_argument("--repeats", type=int, default=1)
    a = sub.add_parser("alpha-study", parents=[common], help="plain vs truncated-kernel multiplier")
    a.add_argument("--range", default="0.05,0.1,0.2,0.5,1,1.5,2,3,5", help="alpha L / 2 pi values")
    sub.add_parser("tune", parents=[common], help="pick xi, k_inf and M for a tolerance")
    return p


_COMMANDS = {
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "alpha-study": cmd_alpha_study,
    "tune": cmd_tune,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EwaldError, ValueError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
