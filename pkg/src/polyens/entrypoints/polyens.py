#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Expectations of characteristic polynomials, Schur averages and correlation
kernels for polynomial ensembles, checked against brute-force oracles.
"""

import argparse
import logging
import os
import sys

from polyens.commands import get_command
from polyens.conf import polyens_conf
from polyens.numerics import ConvergenceError, PreconditionError
from polyens.schema import ConfigError, load_config, report_to_csv

EPILOG_STR = """
The run configuration is a JSON document (use "-" to read it from the standard
input). Complex numbers are written as [re, im] pairs. For instance:

  {"schema_version": 1,
   "ensemble": {"kind": "gue_ext", "a": [0.5, -0.5]},
   "zs": [[0.3, 0.0]], "ys": [[1.0, 1.0]],
   "providers": ["formula", "special", "quad"]}

Exit codes: 0 success, 2 configuration error, 3 precondition violation,
4 numerical non-convergence (or a reported gap above the tolerance).

Numerical defaults can be changed in the user-wide configuration file
(~/.polyensrc.ini), sections [quadrature], [montecarlo] and [ratio].
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_CONVERGENCE = 4

logger = logging.getLogger(__name__)


def _parser() -> argparse.ArgumentParser:
    program_name = os.path.basename(sys.argv[0])
    program_short_desc = program_name + " -- " + __doc__.lstrip("\n")
    # noinspection PyTypeChecker
    parser = argparse.ArgumentParser(
        description=program_short_desc,
        epilog=EPILOG_STR,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "command",
        choices=["zcheck", "giambelli", "ratio", "kernel", "oracle"],
        help="The computation to run.",
    )
    parser.add_argument(
        "--config",
        dest="config",
        action="store",
        required=True,
        help='The JSON run configuration ("-" for the standard input).',
    )
    parser.add_argument(
        "--out",
        dest="out",
        action="store",
        default=None,
        help="Where to write the report [default: configuration, else stdout].",
    )
    parser.add_argument(
        "--seed",
        dest="seed",
        action="store",
        type=int,
        default=None,
        help="Override the Monte Carlo seed of the configuration.",
    )
    parser.add_argument(
        "--format",
        dest="format",
        action="store",
        choices=["json", "csv"],
        default=None,
        help="The report format [default: configuration, else json].",
    )
    parser.add_argument(
        "--logfile",
        dest="logfile",
        action="store",
        default=None,
        help="The log file [default: ~/.polyens.log or configuration].",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        dest="verbose",
        action="count",
        default=0,
        help="Log more (once for INFO, twice for DEBUG).",
    )
    return parser


def _read_config(where: str):
    if where == "-":
        return load_config(sys.stdin.read())
    try:
        with open(where, encoding="utf-8") as fh_conf:
            return load_config(fh_conf.read())
    except OSError as exc:
        raise ConfigError(f"Unable to read the configuration: {exc}") from exc


def _write(text: str, where: str):
    if where:
        with open(where, "w", encoding="utf-8") as fh_out:
            fh_out.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def main(argv=None) -> int:
    """Run one command and return the process exit code."""
    args = _parser().parse_args(argv)

    # Setup the logging facility
    level = {0: None, 1: "INFO"}.get(args.verbose, "DEBUG")
    handler = polyens_conf.logging_config(filename=args.logfile, level=level)

    try:
        try:
            config = _read_config(args.config)
            if args.seed is not None:
                if not 0 <= args.seed < 1 << 64:
                    raise ConfigError("The seed must be a 64-bit unsigned integer.")
                config.numerics.seed = args.seed
            report = get_command(args.command)(config)
        except ConfigError as exc:
            print(f"polyens: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except PreconditionError as exc:
            logger.error("Precondition violated: %s", exc)
            print(f"polyens: precondition violated: {exc}", file=sys.stderr)
            return EXIT_PRECONDITION
        except ConvergenceError as exc:
            logger.error("Numerical failure: %s", exc)
            print(f"polyens: numerical failure: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE
        out_format = args.format or config.output.format
        text = report_to_csv(report) if out_format == "csv" else report.to_json()
        _write(text, args.out or config.output.path)
        return EXIT_OK if report.ok else EXIT_CONVERGENCE
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
