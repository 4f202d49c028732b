"""Command-line interface: solve, ablate, analyze-bins, move-stats,
convergence.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    DEFAULT_FRACTIONS,
    InputError,
    InternalError,
    RunSpec,
    cmd_ablate,
    cmd_analyze_bins,
    cmd_convergence,
    cmd_move_stats,
    cmd_solve,
)
from .clock import UNITS_PER_SECOND
from .model import ParseError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_run_options(p):
    p.add_argument("instances", nargs="+", type=Path, help="instance files (.vrp)")
    p.add_argument("--host", choices=("hgs", "gls"), default="hgs")
    p.add_argument("--pils", choices=("on", "off"), default="on")
    p.add_argument("--phi-freq", type=int, default=None,
                   help="tracked patterns per length (default 5n)")
    p.add_argument("--phi-size", type=int, default=None,
                   help="patterns sampled per length and pass (default n)")
    p.add_argument("--lmin", type=int, default=3)
    p.add_argument("--lmax", type=int, default=5)
    p.add_argument("--pex", type=float, default=None,
                   help="extraction probability (default 0.1 hgs / 1.0 gls)")
    p.add_argument("--tmax", type=float, default=60.0, help="budget in seconds")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--bks", type=Path, default=None, help="CSV instance,bks")
    p.add_argument("--meta", type=Path, default=None,
                   help="CSV with instance categories")
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--ups", type=int, default=UNITS_PER_SECOND,
                   help="work units per budget second")
    p.add_argument("--dump-pool", action="store_true",
                   help="write the pattern pool of each run")


def _spec_from(args, pils=None) -> RunSpec:
    return RunSpec(
        instances=args.instances,
        host=args.host,
        pils=(args.pils == "on") if pils is None else pils,
        seeds=args.seeds,
        seed_base=args.seed_base,
        t_max=args.tmax,
        phi_freq=args.phi_freq,
        phi_size=args.phi_size,
        l_min=args.lmin,
        l_max=args.lmax,
        p_ex=args.pex,
        out_dir=args.out,
        bks_path=args.bks,
        meta_path=args.meta,
        jobs=args.jobs,
        units_per_second=args.ups,
        dump_pool=args.dump_pool,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pils",
                     description="CVRP solvers with pattern-injection moves")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[], help="run the chosen host")
    _add_run_options(p)

    p = sub.add_parser("ablate", help="paired runs, injection on vs off")
    _add_run_options(p)

    p = sub.add_parser("analyze-bins",
                       help="pattern frequency bins vs a reference solution")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--pool", type=Path, required=True, help="pool dump CSV")
    p.add_argument("--solution", type=Path, required=True,
                   help="reference solution file")
    p.add_argument("--bks", type=Path, default=None)
    p.add_argument("--out", type=Path, default=Path("analysis"))

    p = sub.add_parser("move-stats",
                       help="histograms of applied injection moves")
    p.add_argument("--logs", type=Path, required=True,
                   help="directory with *.moves.csv and summary.csv")
    p.add_argument("--out", type=Path, default=Path("analysis"))

    p = sub.add_parser("convergence", help="best-cost trace over the budget")
    p.add_argument("--logs", type=Path, required=True,
                   help="directory with summary.csv and *.events.csv")
    p.add_argument("--fractions", type=str,
                   default=",".join(str(f) for f in DEFAULT_FRACTIONS),
                   help="comma-separated percentages of the budget")
    p.add_argument("--bks", type=Path, default=None)
    p.add_argument("--out", type=Path, default=Path("analysis"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if args.command == "solve":
            out = cmd_solve(_spec_from(args))
        elif args.command == "ablate":
            out = cmd_ablate(_spec_from(args))
        elif args.command == "analyze-bins":
            out = cmd_analyze_bins(args.instance, args.pool, args.solution,
                                   args.bks, args.out)
        elif args.command == "move-stats":
            out = cmd_move_stats(args.logs, args.out)
        elif args.command == "convergence":
            fractions = tuple(int(f) for f in args.fractions.split(","))
            out = cmd_convergence(args.logs, args.out, fractions, args.bks)
        else:  # pragma: no cover - argparse enforces the choices
            return 1
        print(out)
        return 0
    except (InputError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
