"""satbench command line: run / compare / params / selftest.

Exit codes: 0 ok, 2 usage, 3 config, 4 simulation, 5 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import config
import core
from functions.errors import ConfigError, ReportWriteError, SimulationError
from functions.kpifunc import EXPERIMENTS, KpiRow
from functions.logfunc import setup_logging
from functions.reportfunc import FORMATS, render_text, write_report
from functions.selftest import run_selftest

logger = logging.getLogger("satbench")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SIMULATION = 4
EXIT_IO = 5


def _formats(value: str) -> List[str]:
    if value == "all":
        return list(FORMATS)
    parts = [p.strip() for p in value.split(",") if p.strip()]
    bad = [p for p in parts if p not in FORMATS]
    if bad or not parts:
        raise argparse.ArgumentTypeError(f"format must be all or a comma list of {', '.join(FORMATS)}")
    return parts


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--mode", choices=("capacity-true", "paper-calibration"), default=None)
    common.add_argument("--out", default=None, help="output directory (default: out)")
    common.add_argument("--format", type=_formats, default=list(FORMATS), help="text|csv|json, comma list, or all")
    common.add_argument("--repetitions", type=int, default=None, help="runs per experiment (default: scenario value)")
    common.add_argument("--trace", default=None, help="write the event trace of run 0 to this file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="satbench", description="GEO access-stack KPI simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run experiments on one scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("experiment", nargs="?", default="all", help=f"{', '.join(EXPERIMENTS)} or all")
    p_run.add_argument("out_dir", nargs="?", default=None)

    p_cmp = sub.add_parser("compare", parents=[common], help="run both scenarios and add ratio columns")
    p_cmp.add_argument("scenario_a")
    p_cmp.add_argument("scenario_b")
    p_cmp.add_argument("out_dir", nargs="?", default=None)
    p_cmp.add_argument("--experiment", default="all")

    p_par = sub.add_parser("params", help="print derived static link parameters")
    p_par.add_argument("scenario")
    p_par.add_argument("--mode", choices=("capacity-true", "paper-calibration"), default=None)
    p_par.add_argument("-v", "--verbose", action="store_true")

    p_st = sub.add_parser("selftest", help="run the property suites")
    p_st.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p_st.add_argument("--suite", default=None, help="comma list of suite keys (a-g)")
    p_st.add_argument("-v", "--verbose", action="store_true")
    return parser


def _progress(started: float):
    def on_row(label: str, kind: str, row: KpiRow) -> None:
        if (row.run_index + 1) % max(1, config.PROGRESS_EVERY) == 0:
            logger.info("[run] %s %s run %d done (%.1fs wall)", label, kind, row.run_index, time.perf_counter() - started)
    return on_row


def _check_repetitions(args: argparse.Namespace) -> None:
    if args.repetitions is not None and args.repetitions < 1:
        raise ValueError("--repetitions must be >= 1")


def cmd_run(args: argparse.Namespace) -> int:
    _check_repetitions(args)
    kinds = core.resolve_experiments(args.experiment)
    scenario = core.load_scenario(args.scenario, seed=args.seed, mode=args.mode)
    started = time.perf_counter()
    result = core.run_scenario(
        scenario, kinds, args.repetitions,
        trace_to=Path(args.trace) if args.trace else None, on_row=_progress(started),
    )
    report = core.single_report(result)
    out = args.out or args.out_dir or "out"
    write_report(report, out, args.format)
    if "text" in args.format:
        print(render_text(report, kinds))
    logger.info("[run] finished in %.1fs wall", time.perf_counter() - started)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    _check_repetitions(args)
    kinds = core.resolve_experiments(args.experiment)
    a = core.load_scenario(args.scenario_a, seed=args.seed, mode=args.mode)
    b = core.load_scenario(args.scenario_b, seed=args.seed, mode=args.mode)
    started = time.perf_counter()
    report = core.compare_scenarios(
        a, b, kinds, args.repetitions,
        trace_to=Path(args.trace) if args.trace else None, on_row=_progress(started),
    )
    out = args.out or args.out_dir or "out"
    write_report(report, out, args.format)
    if "text" in args.format:
        print(render_text(report, kinds))
    logger.info("[compare] finished in %.1fs wall", time.perf_counter() - started)
    return EXIT_OK


def cmd_params(args: argparse.Namespace) -> int:
    scenario = core.load_scenario(args.scenario, mode=args.mode)
    sys.stdout.write(core.render_params(core.params_listing(scenario)))
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    only = [s.strip() for s in args.suite.split(",")] if args.suite else None
    started = time.perf_counter()
    results = run_selftest(quick=args.quick, only=only)
    for r in results:
        print(f"({r.key}) {'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r for r in results if not r.passed]
    logger.info("[selftest] %d/%d suites passed in %.1fs wall", len(results) - len(failed), len(results), time.perf_counter() - started)
    return EXIT_SIMULATION if failed else EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "params": cmd_params,
    "selftest": cmd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if getattr(args, "verbose", False) else None)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("[config] %s", e)
        return EXIT_CONFIG
    except SimulationError as e:
        logger.error("[sim] %s", e)
        return EXIT_SIMULATION
    except ReportWriteError as e:
        logger.error("[report] %s", e)
        return EXIT_IO
    except ValueError as e:
        logger.error("[usage] %s", e)
        return EXIT_USAGE
    except OSError as e:
        logger.error("[io] %s", e)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
