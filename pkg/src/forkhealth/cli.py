"""Command line entry point: ``forkhealth mine git|forge``, ``analyze``, ``report``, ``run-all``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .pipeline import EXIT_FAILURE, EXIT_USAGE, ConfigError


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON file with RunConfig keys")
    g.add_argument("--projects", dest="project_list_path", help="project list CSV (project_name,github_url,status)")
    g.add_argument("--clones", dest="clone_root_dir", help="directory holding local clones")
    g.add_argument("--cache-dir", dest="cache_dir", help="record/replay cache directory")
    g.add_argument("--out", dest="output_dir", help="run output directory")
    g.add_argument("--commit-limit", type=int, help="recent commits for logic coupling (default 150)")
    g.add_argument("--full-history-limit", type=int, help="cap on history for additive/dimensionality indices")
    g.add_argument("--pr-page-cap", type=int, help="pages of 30 PRs to fetch (default 5)")
    g.add_argument("--interval-days", type=int, help="frequency window length (default 30)")
    g.add_argument("--dup-keywords", dest="duplicate_keywords", help="comma-separated duplicate comment stems")
    g.add_argument("--dup-denominator", choices=("closed", "all"))
    g.add_argument("--offline", dest="offline_replay", action="store_const", const=True,
                   help="replay recorded API responses only")
    g.add_argument("--bins", dest="histogram_bins", type=int, help="histogram bins (default 20)")
    g.add_argument("--base-url", help="forge REST API base URL")
    g.add_argument("--workers", type=int, help="parallel git miners (default CPU count)")
    g.add_argument("--paper-layout", action="store_const", const=True,
                   help="interleaved intercept/slope rows in the univariate text table")
    g.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forkhealth", description="Fork-practice metrics and project outcome analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="compute metrics from git history or the forge API")
    mine_sub = mine.add_subparsers(dest="source", required=True)
    for source in ("git", "forge"):
        _common(mine_sub.add_parser(source, help=f"mine {source} metrics"))
    _common(sub.add_parser("analyze", help="clean metrics, fit models and write reports"))
    _common(sub.add_parser("report", help="re-render reports from a previous analysis"))
    _common(sub.add_parser("run-all", help="mine git, mine forge, analyze"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    flags = {k: v for k, v in vars(args).items() if k not in ("command", "source", "config", "verbose")}
    try:
        cfg = pipeline.load_config(flags, args.config)
        if args.command == "mine":
            run = pipeline.cmd_mine_git if args.source == "git" else pipeline.cmd_mine_forge
            return run(cfg)
        if args.command == "analyze":
            return pipeline.cmd_analyze(cfg)
        if args.command == "report":
            return pipeline.cmd_report(cfg)
        return pipeline.cmd_run_all(cfg)
    except ConfigError as exc:
        logging.getLogger("forkhealth").error("configuration error: %s", exc)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level exit code contract
        logging.getLogger("forkhealth").error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
