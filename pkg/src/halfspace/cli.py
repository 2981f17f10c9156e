"""Command-line front end.

Subcommands: exact, mc, compare, green, meander, verify, table.  All grid
subcommands read a JSON config (see README for the schema); flags override
the config's seed, output directory and thread count.
"""

from __future__ import annotations

import argparse
import sys

from .errors import HalfSpaceError
from .harness import ExperimentConfig, run


def _add_common(p: argparse.ArgumentParser, need_config: bool) -> None:
    p.add_argument("--config", required=need_config, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="64-bit RNG seed override")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--threads", type=int, default=None, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="halfspace",
        description="Exact, Monte Carlo and asymptotic computation for random "
        "walks killed on leaving the upper half space.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("exact", "killed-walk local probabilities by dynamic programming"),
        ("mc", "Monte Carlo local-probability estimates"),
        ("compare", "exact measurements against asymptotic skeletons"),
        ("green", "Green function with certified truncation bounds"),
        ("meander", "conditioned-walk histograms and their convergence"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p, need_config=True)
    pv = sub.add_parser("verify", help="run the verification suite")
    _add_common(pv, need_config=False)
    pv.add_argument("--level", choices=("quick", "full"), default="quick")
    pt = sub.add_parser("table", help="pretty-print rows.csv from a run directory")
    pt.add_argument("--out", required=True, help="run directory containing rows.csv")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "table":
            cfg = ExperimentConfig(walk={}, mode="table", out=args.out)
            return run(cfg, args.out)
        if args.command == "verify":
            cfg = ExperimentConfig(walk={}, mode="verify",
                                   verify_level=args.level,
                                   out=args.out or "out")
            return run(cfg, cfg.out)
        cfg = ExperimentConfig.from_json(args.config)
        cfg.mode = args.command
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        return run(cfg, cfg.out)
    except HalfSpaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
