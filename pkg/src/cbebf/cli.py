"""Command-line entry point: ``cbebf run | bounds | oracle``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .bench import load_config, run_experiment, summarize
from .mdp import exact_value, load_mdp, mixing_matrix, operator_norm, stationary_distribution
from .projection import eps_prj


def _fmt_vec(v):
    return " ".join(f"{x:.12g}" for x in v)


def cmd_run(args):
    cfg = load_config(args.config)
    overrides = {"output": args.out}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.timing:
        overrides["timing"] = True
    cfg = replace(cfg, **overrides)
    rows = run_experiment(cfg)
    failed = sum(r.failed for r in rows)
    for method, d, n, k, count, mean, sem in summarize(rows):
        if method.endswith("_best") or method == "cbebf_valid":
            setting = f"d={d}" if d >= 0 else "d=best"
            print(f"{method:12s} {setting:8s} n={n:<6d} rp={mean:.6g} +/- {sem:.3g} ({count} trials)")
    print(f"wrote {len(rows)} rows to {args.out}/results.csv" + (f" ({failed} failed)" if failed else ""))
    return 0


def cmd_bounds(args):
    b = eps_prj(args.k, args.D, args.d, args.xi)
    print(f"{b.eps_prj:.12g}")
    return 0


def cmd_oracle(args):
    m = load_mdp(args.mdp)
    print("value:", _fmt_vec(exact_value(m)))
    print("stationary:", _fmt_vec(stationary_distribution(m)))
    print(f"mixing_norm[n={args.n}]: {operator_norm(mixing_matrix(m, args.n)):.12g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="cbebf", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded benchmark sweep and write CSV results")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--timing", action="store_true", help="record wall times (breaks byte-reproducibility)")
    run.set_defaults(func=cmd_run)

    bounds = sub.add_parser("bounds", help="print the projection bias bound eps_prj")
    bounds.add_argument("--k", type=int, required=True)
    bounds.add_argument("--D", type=int, required=True)
    bounds.add_argument("--d", type=int, required=True)
    bounds.add_argument("--xi", type=float, required=True)
    bounds.set_defaults(func=cmd_bounds)

    oracle = sub.add_parser("oracle", help="exact value, stationary distribution and mixing norm")
    oracle.add_argument("--mdp", required=True)
    oracle.add_argument("--n", type=int, default=50, help="horizon for the mixing matrix")
    oracle.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.set_printoptions(precision=12)
    try:
        return args.func(args)
    except Exception as err:  # noqa: BLE001 - report any failure as one diagnostic line
        print(f"cbebf {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
