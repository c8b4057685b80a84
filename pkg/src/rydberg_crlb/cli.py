"""Command-line entry point: surface, campaign, crlb, plan and compare verbs."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import RydbergCrlbError
from .harness import (THREADS_ENV, build_context, compare_report, export, make_plan, run_campaign,
                      sweep_normalized)
from .quantum_model import build_surface
from .response import frequency_marginal, split_lineshapes

log = logging.getLogger("rydberg_crlb")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_surface(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    surf = build_surface(cfg.system(), cfg.x_grid(), cfg.f_grid(), check_grid=True,
                         velocity_points=cfg.velocity_points)
    path = surf.to_csv(out)
    (out / "config.echo").write_text(cfg.echo())
    log.info("surface %dx%d written to %s", surf.x_grid.size, surf.f_grid.size, path)
    return 0


def cmd_campaign(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    res = run_campaign(cfg)
    export(res, out)
    for c in res.cells:
        flag = " INVALID" if c.invalid else ""
        log.info("%-5s x=%-6g sigma0=%-6g mse=%.4g crlb=%.4g failures=%d%s", c.scheme, c.signal, c.sigma0,
                 c.mse, c.crlb, c.failures, flag)
    return 0


def cmd_crlb(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    (out / "crlb.csv").write_text(sweep_normalized(cfg, monte_carlo=False))
    (out / "config.echo").write_text(cfg.echo())
    if args.monte_carlo:
        (out / "sweep.csv").write_text(sweep_normalized(cfg, monte_carlo=True))
    return 0


def cmd_plan(args) -> int:
    cfg = _config(args)
    ctx = build_context(cfg)
    fs = frequency_marginal(ctx.surface, args.signal)
    left, right = split_lineshapes(fs)
    lines = ["side,f"]
    for ls in (left, right):
        if args.strategy == "explicit":
            plan = make_plan("explicit", ls, args.n, frequencies=ls.center + np.asarray(cfg.explicit_offsets))
        else:
            plan = make_plan(args.strategy, ls, args.n, args.span)
        lines += [f"{plan.side},{float(f)!r}" for f in plan.frequencies]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    (out / "compare.csv").write_text(compare_report(cfg, sigma0=args.sigma0))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydberg-crlb", description=(
        "Rydberg RF receiver bounds and estimator campaigns. "
        f"Set {THREADS_ENV} to choose the worker thread count."))
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--config", help="sectioned key/value config file")
        sp.add_argument("--out", required=out_required, help="output directory")

    sp = sub.add_parser("surface", help="build and export the response surface")
    common(sp)
    sp.set_defaults(func=cmd_surface)

    sp = sub.add_parser("campaign", help="Monte Carlo campaign")
    common(sp)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_campaign)

    sp = sub.add_parser("crlb", help="normalized bound sweep over the signal grid")
    common(sp)
    sp.add_argument("--monte-carlo", action="store_true", help="also run trials and add MSE columns")
    sp.set_defaults(func=cmd_crlb)

    sp = sub.add_parser("plan", help="sampling plan for both peaks")
    sp.add_argument("--config")
    sp.add_argument("--strategy", choices=("uniform", "maxslope", "explicit"), required=True)
    sp.add_argument("--n", type=int, required=True, help="frequencies per side")
    sp.add_argument("--signal", type=float, default=15.0, help="Omega_RF/2pi in MHz")
    sp.add_argument("--span", type=float, default=10.0, help="uniform window in MHz")
    sp.add_argument("--out", help="CSV file (stdout when omitted)")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("compare", help="r0 and r[x] report")
    common(sp)
    sp.add_argument("--sigma0", type=float, default=0.01)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (RydbergCrlbError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
