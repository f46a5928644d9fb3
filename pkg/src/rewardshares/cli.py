"""Command line entry point: ``run``, ``plot`` and ``list``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .plotting import plot

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rewardshares", description="Reward-share participation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment preset")
    r.add_argument("--exp", required=True, help="preset id (see 'list')")
    r.add_argument("--seeds", type=int, help="number of independent runs")
    r.add_argument("--episodes", type=int, help="episode budget per run")
    r.add_argument("--out", required=True, help="result directory")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--master-seed", type=int, default=0)
    r.add_argument("--log-every", type=int, help="average metrics over blocks of this many episodes")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--config", help="file of KEY=VALUE lines (applied before --set)")

    p = sub.add_parser("plot", help="render SVG charts from metrics.csv")
    p.add_argument("--in", dest="input", required=True, help="result directory")
    p.add_argument("--metric", help="only this metric")
    p.add_argument("--out", help="output directory (default: <in>/plots)")

    sub.add_parser("list", help="show the experiment presets")
    return parser


def _cmd_list() -> int:
    rows = harness.list_experiments()
    width = max(len(p.id) for p in rows)
    for p in rows:
        print(f"{p.id:<{width}}  {p.reference:<34}  {p.description}")
    return 0


def _cmd_run(args) -> int:
    try:
        overrides = harness.read_config_file(args.config) if args.config else {}
        for item in args.overrides:
            k, v = harness.parse_override(item)
            overrides[k] = v
        cfg = harness.ExperimentConfig(
            experiment=args.exp,
            seeds=args.seeds,
            episodes=args.episodes,
            out=args.out,
            workers=args.workers,
            master_seed=args.master_seed,
            log_every=args.log_every,
            overrides=overrides,
        )
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    out = harness.run(cfg)
    print(out / "metrics.csv")
    return 0


def _cmd_plot(args) -> int:
    try:
        paths = plot(args.input, args.metric, args.out)
    except LookupError as exc:
        raise UsageError(str(exc)) from exc
    for path in paths:
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_plot(args)
    except UsageError as exc:
        print(f"rewardshares: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"rewardshares: fatal: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
