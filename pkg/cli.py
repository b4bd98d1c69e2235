import argparse
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import logger
from errors import ConfigError, InsufficientDecayError, ParameterDomainError, QuadratureError
from executor import MonteCarloExecutor
from runner.config import build_scenario, list_presets, load_scenario_file, preset
from runner.experiments import run
from tools.tools import DEFAULT_FUNCTION_TOOLS
from utils import render_csv, write_csv_table

load_dotenv()

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fso-backhaul",
        description="Coverage, rate and diversity experiments for RF uplinks with FSO backhaul",
    )
    parser.add_argument("subcommand", nargs="?", choices=[t["name"] for t in DEFAULT_FUNCTION_TOOLS],
                        help="experiment to run")
    parser.add_argument("--config", help="scenario TOML file")
    parser.add_argument("--preset", action="append", default=[], metavar="NAME",
                        help="preset applied on top of the defaults (repeatable)")
    parser.add_argument("--seed", type=int, help="overrides [sweep].seed")
    parser.add_argument("--mc-budget", type=int, help="overrides [sweep].mc_budget")
    parser.add_argument("--out", help="CSV destination; overrides [output].path, stdout when neither is set")
    parser.add_argument("--workers", type=int, help="Monte Carlo worker processes (default FSO_WORKERS or 1)")
    parser.add_argument("--list-presets", action="store_true", help="print the preset names and exit")
    return parser


def _print_presets() -> None:
    for name in list_presets():
        fragment = preset(name)
        print(f"{name:20s} [{fragment.section}] {fragment.description}")


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        if args.list_presets:
            _print_presets()
            return EXIT_OK
        if args.subcommand is None:
            build_parser().print_usage(sys.stderr)
            return EXIT_CONFIG

        raw = load_scenario_file(args.config) if args.config else {}
        sweep = dict(raw.get("sweep", {}))
        if args.seed is not None:
            sweep["seed"] = args.seed
        if args.mc_budget is not None:
            sweep["mc_budget"] = args.mc_budget
        raw["sweep"] = sweep
        config = build_scenario(raw, presets=args.preset)

        table = run(args.subcommand, config, MonteCarloExecutor(workers=args.workers))
        path = args.out or config.output.path
        if path:
            write_csv_table(table, path)
        else:
            sys.stdout.write(render_csv(table))
        return EXIT_OK
    except (ConfigError, ParameterDomainError) as exc:
        logger.error(f"configuration error: {exc}")
        for item in getattr(exc, "field_errors", []):
            logger.error(f"  {item['field']}: {item['message']}")
        return EXIT_CONFIG
    except (QuadratureError, InsufficientDecayError) as exc:
        logger.error(f"numerical failure: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
