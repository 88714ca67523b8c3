#!/usr/bin/env python3
"""
Main entry point for the Monge-Ampere geometry engine.

Reads a JSON run config, executes the verification pipeline and writes a JSON
report. Exit codes: 0 ok, 2 config error, 3 verification failure, 4 I/O error.
"""

import argparse
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

from mageom.exceptions import ConfigError
from mageom.models import Report
from mageom.pipeline import (
    INTEGRABILITY_STEPS,
    RESIDUAL_STEPS,
    RUN_STEPS,
    TOOL_NAME,
    execute,
    load_config,
    report_json,
    resolve_structure,
    run_quadric,
    validate_config,
)
from mageom.utils import setup_logging

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFICATION = 3
EXIT_IO = 4

STEPS_BY_COMMAND = {
    "run": RUN_STEPS,
    "residual": RESIDUAL_STEPS,
    "integrability": INTEGRABILITY_STEPS,
}


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command line arguments.

    Returns:
        Parsed arguments
    """
    parser = argparse.ArgumentParser(
        description='Monge-Ampere structures and generalized almost geometries - verification engine'
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--out',
        type=str,
        help='Write the JSON report to this file instead of stdout'
    )
    common.add_argument(
        '--seed',
        type=int,
        help='RNG seed for sample points (overrides the config and MAGEOM_SEED)'
    )
    common.add_argument(
        '--tol',
        type=float,
        help='Single tolerance for zero tests, structure classification and family identities'
    )
    common.add_argument(
        '--points',
        type=int,
        help='Number of sample points (for quadric: admissible triples per cell)'
    )

    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', parents=[common], help='Run the full verification pipeline')
    run.add_argument('config', type=str, help='Path to the JSON run config')

    validate = subparsers.add_parser('validate', help='Check a config without computing anything')
    validate.add_argument('config', type=str, help='Path to the JSON run config')

    subparsers.add_parser('quadric', parents=[common], help='Sweep the quadric family tables')

    residual = subparsers.add_parser('residual', parents=[common], help='Check solution candidates only')
    residual.add_argument('config', type=str, help='Path to the JSON run config')

    integrability = subparsers.add_parser('integrability', parents=[common], help='Closedness checks only')
    integrability.add_argument('config', type=str, help='Path to the JSON run config')

    return parser.parse_args(argv)


def check_overrides(args: argparse.Namespace) -> None:
    """
    Range checks for the numeric options.

    Raises:
        ConfigError: an option is out of range
    """
    points, seed, tol = (getattr(args, name, None) for name in ("points", "seed", "tol"))
    if points is not None and points < 1:
        raise ConfigError(f"must be at least 1, got {points}", "--points")
    if seed is not None and seed < 0:
        raise ConfigError(f"must be non-negative, got {seed}", "--seed")
    if tol is not None and not (math.isfinite(tol) and tol > 0):
        raise ConfigError(f"must be a positive number, got {tol}", "--tol")


def _print_json(data: dict) -> None:
    sys.stdout.write(json.dumps(data, indent=2) + "\n")


def _error_document(kind: str, error: dict) -> dict:
    return {"tool": TOOL_NAME, "status": kind, "error": error}


def write_report(report: Report, out: Optional[str]) -> None:
    """
    Write the report to a file or stdout.

    Raises:
        OSError: the output file cannot be written
    """
    text = report_json(report)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point.

    Returns:
        Exit code
    """
    # Set up logging
    logger = setup_logging("main")

    # Parse command line arguments
    args = parse_args(argv)

    try:
        if args.command == 'validate':
            diagnostics = validate_config(args.config)
            _print_json(diagnostics)
            logger.info(f"Config '{args.config}' is valid")
            return EXIT_OK

        check_overrides(args)
        if args.command == 'quadric':
            report = run_quadric(seed=args.seed, points=args.points, tol=args.tol)
        else:
            config = load_config(args.config)
            # unknown presets are config errors, not step failures
            resolve_structure(config.structure)
            report = execute(
                config,
                STEPS_BY_COMMAND[args.command],
                seed=args.seed,
                points=args.points,
                tol=args.tol,
            )

        write_report(report, args.out)
        if report.verification_failed:
            failed = [record.name for record in report.steps if not record.success]
            logger.warning(f"Verification failed in: {', '.join(failed)}")
            return EXIT_VERIFICATION
        return EXIT_OK

    except ConfigError as e:
        logger.error(f"Config error: {str(e)}")
        _print_json(_error_document("config_error", e.to_dict()))
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"I/O error: {str(e)}")
        _print_json(_error_document("io_error", {"kind": "io_error", "message": str(e)}))
        return EXIT_IO
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130
    except Exception as e:
        logger.exception(f"Error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
