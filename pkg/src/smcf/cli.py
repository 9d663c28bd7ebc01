"""Command line entry point: ``smcf run | sweep | inspect``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config, parse_value
from .errors import SMCFError
from .experiments import resolve_jobs, run_experiment
from .grid import read_snapshot


def _report(verdicts, out):
    for v in verdicts:
        print(v.line(), file=out)
    return 0 if all(v.passed for v in verdicts) else 1


def cmd_run(args):
    cfg = load_config(args.config)
    return _report(run_experiment(cfg, jobs=args.jobs), sys.stdout)


def cmd_sweep(args):
    base = load_config(args.config)
    status = 0
    for raw in args.values:
        value = parse_value(raw)
        cfg = base.with_value(args.param, value)
        out = Path(base.output_dir) / f"{args.param}={raw}"
        cfg.output_dir = str(out)
        print(f"# {args.param} = {raw} -> {out}")
        status |= _report(run_experiment(cfg, jobs=args.jobs, out=out), sys.stdout)
    return status


def cmd_inspect(args):
    grid, values, t, extra = read_snapshot(args.snapshot)
    print(f"dim = {grid.dim}")
    print(f"n = {' x '.join(map(str, grid.sizes))}")
    print(f"length = {', '.join(repr(L) for L in grid.lengths)}")
    print(f"codim_components = {values.shape[-1]}")
    print(f"t = {t!r}")
    lin = extra.get("lin") if extra else None
    if lin is not None:
        from .frame import coulomb_rotate, exterior_frame
        from .geometry import Immersion, complex_shape, compute_geometry
        from .norms import extrinsic_sobolev

        im = Immersion(grid, values, np.array(lin.split(","), float).reshape(values.shape[-1], grid.dim))
        geo = compute_geometry(im)
        ev = geo.metric_eigenvalues()
        print(f"g_eig = [{float(ev.min())!r}, {float(ev.max())!r}]")
        try:
            lam = complex_shape(geo, coulomb_rotate(exterior_frame(im, geo=geo), geo)).lam
        except SMCFError as exc:
            print(f"lambda = unavailable ({exc})")
        else:
            print(f"lambda_L2 = {grid.l2_norm(lam)!r}")
            print(f"lambda_H1 = {extrinsic_sobolev(lam, 1.0, grid)!r}")
            print(f"lambda_H2 = {extrinsic_sobolev(lam, 2.0, grid)!r}")
    print(f"periodic_Linf = {float(np.max(np.abs(values)))!r}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="smcf", description="Skew mean curvature flow experiments")
    sub = p.add_subparsers(dest="command", required=True)
    jobs = argparse.ArgumentParser(add_help=False)
    jobs.add_argument("--jobs", type=int, default=None, help="worker processes (SMCF_THREADS overrides)")

    r = sub.add_parser("run", parents=[jobs], help="run one experiment config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[jobs], help="run a config once per value of one key")
    s.add_argument("config")
    s.add_argument("--param", required=True, help="dotted key, e.g. flow.dt")
    s.add_argument("--values", nargs="+", required=True)
    s.set_defaults(func=cmd_sweep)

    i = sub.add_parser("inspect", help="print a snapshot header and norm summary")
    i.add_argument("snapshot")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if hasattr(args, "jobs"):
            args.jobs = resolve_jobs(args.jobs)
        return args.func(args)
    except SMCFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
