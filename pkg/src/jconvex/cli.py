"""Command line entry point ``jconvex``.

Exit codes: 0 all tasks pass, 1 a task failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import json_schema, load_scenario
from .errors import ConfigInvalid, MissingSection
from .runner import bundled_scenarios, dumps, emit_plotdata, resolve_config, run_config

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jconvex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("config", help="scenario JSON path or bundled scenario name")
    run.add_argument("--out", default=None, help="directory for the report (default: print to stdout)")
    run.add_argument("--parallel", type=int, default=1, metavar="N", help="worker threads per task")
    run.add_argument("--log-level", default="WARNING",
                     choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    val = sub.add_parser("validate", help="validate a scenario without running it")
    val.add_argument("config")

    plots = sub.add_parser("emit-plots", help="write CSV plot data for one report section")
    plots.add_argument("report")
    plots.add_argument("--section", required=True, help="task name inside the report")
    plots.add_argument("--out", default=".", help="output directory")

    sub.add_parser("schema", help="print the scenario JSON schema")
    sub.add_parser("list", help="list bundled scenarios")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(json_schema(), indent=2, sort_keys=True))
        return EXIT_PASS
    if args.command == "list":
        print("\n".join(bundled_scenarios()))
        return EXIT_PASS
    if args.command == "validate":
        try:
            s = load_scenario(resolve_config(args.config))
        except ConfigInvalid as exc:
            print(exc, file=sys.stderr)
            return EXIT_CONFIG
        print(f"{s.name}: valid ({len(s.tasks)} tasks)")
        return EXIT_PASS
    if args.command == "emit-plots":
        try:
            report = json.loads(Path(args.report).read_text())
            path = emit_plotdata(report, args.section, args.out)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read report: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except MissingSection as exc:
            print(exc, file=sys.stderr)
            return EXIT_FAIL
        print(path)
        return EXIT_PASS

    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        report, _ = run_config(args.config, args.out, max(1, args.parallel))
    except ConfigInvalid as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.out is None:
        sys.stdout.write(dumps(report))
    for t in report["tasks"]:
        print(f"{t['status']:5s} {t['name']}", file=sys.stderr)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
