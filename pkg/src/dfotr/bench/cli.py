"""Benchmark command line: noise and failure protocols plus the problem list.

Outputs CSV files with fixed schemas (17 significant digits throughout):

* ``runs-<tag>-tau<t>.csv``: problem,solver,run,cost ("inf" on failure)
* ``profile-<tag>.csv``:     tau,solver,alpha,proportion

``<tag>`` encodes the contamination level (for example sigma1e-08 or p0.05).
With a single level and tau the canonical names runs.csv and profile.csv are
written as well. A fixed --seed makes outputs byte-identical across runs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .harness import run_experiment
from .problems import collection

__all__ = ["run_cli", "main"]


def _fmt(x):
    return format(float(x), ".17g")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dfotr-bench",
        description="benchmark protocols for the trust-region DFO solvers")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tau", action="append", type=float, default=None,
                        help="convergence tolerance (repeatable)")
    common.add_argument("--solvers", type=str, default="newuoa,bfgs,cg",
                        help="comma-separated solver tokens")
    common.add_argument("--runs", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=str, default=".")
    common.add_argument("--budget-mult", type=int, default=500)
    common.add_argument("--plot", choices=["none", "svg"], default="none")
    common.add_argument("--max-dim", type=int, default=None,
                        help="restrict the collection to dimensions <= N")

    noise = sub.add_parser("noise", parents=[common],
                           help="multiplicative Gaussian noise protocol")
    noise.add_argument("--sigma", action="append", type=float, default=None,
                       help="noise level (repeatable)")

    nan = sub.add_parser("nan", parents=[common],
                         help="random evaluation-failure protocol")
    nan.add_argument("--p", action="append", type=float, default=None,
                     help="failure probability (repeatable)")

    sub.add_parser("list", help="print the built-in problem collection")
    return parser


def _level_tag(kind, level):
    return f"sigma{level:g}" if kind == "noise" else f"p{level:g}"


def _write_outputs(result, out_dir, plot):
    os.makedirs(out_dir, exist_ok=True)
    single = len(result.levels) == 1 and len(result.taus) == 1
    for level in result.levels:
        tag = _level_tag(result.kind, level)
        prof_path = os.path.join(out_dir, f"profile-{tag}.csv")
        prof_lines = ["tau,solver,alpha,proportion"]
        for tau in result.taus:
            prof = result.profiles[(level, tau)]
            for solver in result.solvers:
                curve = prof.curves[solver]
                for alpha, prop in zip(prof.alphas, curve):
                    prof_lines.append(
                        f"{_fmt(tau)},{solver},{_fmt(alpha)},{_fmt(prop)}")
        with open(prof_path, "w") as fh:
            fh.write("\n".join(prof_lines) + "\n")
        if single:
            with open(os.path.join(out_dir, "profile.csv"), "w") as fh:
                fh.write("\n".join(prof_lines) + "\n")

        for tau in result.taus:
            costs = result.costs[(level, tau)]
            lines = ["problem,solver,run,cost"]
            for pi, prob in enumerate(result.problems):
                for si, solver in enumerate(result.solvers):
                    for r in range(result.runs):
                        c = costs[si, pi, r]
                        cost = "inf" if math.isinf(c) else str(int(c))
                        lines.append(f"{prob.name},{solver},{r},{cost}")
            path = os.path.join(out_dir, f"runs-{tag}-tau{tau:g}.csv")
            with open(path, "w") as fh:
                fh.write("\n".join(lines) + "\n")
            if single:
                with open(os.path.join(out_dir, "runs.csv"), "w") as fh:
                    fh.write("\n".join(lines) + "\n")

        if plot == "svg":
            _plot_level(result, level, out_dir, tag)


def _plot_level(result, level, out_dir, tag):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    for tau in result.taus:
        prof = result.profiles[(level, tau)]
        fig, ax = plt.subplots(figsize=(5, 4))
        for solver in result.solvers:
            ax.step(prof.alphas, prof.curves[solver], where="post", label=solver)
        ax.set_xlabel("log2 of normalized cost")
        ax.set_ylabel("proportion of problems solved")
        ax.set_ylim(0.0, 1.0)
        ax.set_title(f"{tag}, tau={tau:g}")
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, f"profile-{tag}-tau{tau:g}.svg"))
        plt.close(fig)


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "list":
        for p in collection():
            star = "pool" if p.fstar is None else _fmt(p.fstar)
            tags = ",".join(sorted(p.tags))
            print(f"{p.name:24s} n={p.n:<3d} fstar={star:24s} tags={tags}")
        return 0

    taus = args.tau or [1e-2]
    solvers = [s for s in args.solvers.split(",") if s]
    if args.command == "noise":
        levels = args.sigma if args.sigma is not None else [0.0]
        kind = "noise"
    else:
        levels = args.p if args.p is not None else [0.0]
        kind = "nan"

    try:
        result = run_experiment(kind, levels, taus, solvers, args.runs,
                                args.seed, budget_mult=args.budget_mult,
                                max_dim=args.max_dim)
        _write_outputs(result, args.out, args.plot)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
