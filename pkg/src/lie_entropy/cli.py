"""Command-line interface: run scenarios, inspect presets, start the tool server."""

import argparse
import asyncio
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import yaml

from .config import load_config
from .errors import BudgetError, LieEntropyError, ValidationError
from .presets import get_preset, list_presets
from .runner import emit, run
from .scenario import bundled_scenarios, load_scenario

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INVALID = 2


def debug_requested(argv: Optional[List[str]] = None) -> bool:
    """True when ``--debug`` is on the command line or LIE_ENTROPY_DEBUG is set."""
    argv = sys.argv if argv is None else argv
    return "--debug" in argv or os.environ.get("LIE_ENTROPY_DEBUG", "").lower() in ["true", "1", "yes"]


def enable_debug() -> None:
    logging.getLogger().setLevel(logging.DEBUG)
    logging.getLogger("lie-entropy").setLevel(logging.DEBUG)
    logger.debug("Debug mode enabled")


def describe_preset(name: str) -> Dict[str, Any]:
    """Formulas, group, analytic differential and bundled scenario of a preset."""
    system = get_preset(name)
    info: Dict[str, Any] = {
        "name": system.name,
        "group": system.group.name,
        "dimension": system.group.dimension,
        "description": system.description,
        "formulas": dict(system.formulas),
        "differential": system.differential.tolist() if system.differential is not None else None,
        "control": {
            "lower": list(map(float, system.control.lower)),
            "upper": list(map(float, system.control.upper)),
            "delta": system.control.delta,
            "letters": system.control.size,
        },
        "scenario": None,
    }
    if name in bundled_scenarios():
        info["scenario"] = load_scenario(name).to_dict()
    return info


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lie-entropy", description="Invariance entropy experiments for linear systems on Lie groups")
    parser.add_argument("--debug", action="store_true", help="Enable verbose debugging output")
    parser.add_argument("--config", help="Path to a configuration YAML file")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run a scenario file or bundled scenario")
    run_parser.add_argument("scenario", help="Scenario YAML path or bundled scenario name")
    run_parser.add_argument("--out", help="Output directory (default: runner.output_dir from the configuration)")
    run_parser.add_argument("--mode", choices=["greedy", "exact", "both"], help="Set-cover mode")
    run_parser.add_argument("--log-base", choices=["2", "e"], dest="log_base", help="Logarithm base for entropies")
    run_parser.add_argument("--seed", type=int, help="Random seed")
    run_parser.add_argument("--budget", type=int, help="Trajectory evaluation budget per r_inv call")
    run_parser.add_argument("--timings", action="store_true", help="Include wall-clock timings in summary.yaml")

    presets_parser = commands.add_parser("presets", help="Inspect the built-in systems")
    preset_commands = presets_parser.add_subparsers(dest="preset_command", required=True)
    preset_commands.add_parser("list", help="List preset names")
    show_parser = preset_commands.add_parser("show", help="Show one preset")
    show_parser.add_argument("name", help="Preset name")

    commands.add_parser("serve", help="Start the MCP stdio tool server")
    return parser


def _run_command(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    scenario = load_scenario(args.scenario).with_overrides(args.mode, args.log_base, args.seed, args.budget)
    report = run(scenario, config)
    output_dir = args.out or config.runner.output_dir
    emit(report, output_dir, args.timings or config.runner.include_timings)
    verdict = report.verdict
    print(f"{scenario.name}: {'PASS' if report.passed else 'FAIL'}")
    if verdict is not None:
        estimate = "n/a" if verdict.estimate is None else f"{verdict.estimate:.4f}"
        print(f"  h_inv estimate {estimate} vs Bowen bound {verdict.upper_bound:.4f} (base {verdict.log_base}): upper {verdict.upper_status}, lower {verdict.lower_status}")
    if report.topological_status is not None:
        print(f"  separated-set check: {report.topological_status}")
    print(f"  results in {output_dir}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.debug or debug_requested([] if argv is not None else None):
        enable_debug()

    try:
        if args.command == "run":
            return _run_command(args)
        if args.command == "presets":
            if args.preset_command == "list":
                for name in list_presets():
                    print(name)
                return EXIT_PASS
            print(yaml.safe_dump(describe_preset(args.name), sort_keys=False, default_flow_style=None), end="")
            return EXIT_PASS
        if args.command == "serve":
            from . import server

            asyncio.run(server.main())
            return EXIT_PASS
    except (ValidationError, BudgetError) as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except LieEntropyError as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAIL
    parser.error(f"unknown command {args.command}")
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
