"""Command line entry point ``spectral-decay``."""

from __future__ import annotations

import argparse
import json
import sys

from . import runner
from .errors import ComputeError
from .scenario import ParseError, ValidationError, load
from .serialization import csv_text, write_atomic

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_COMPUTE = 0, 2, 3, 4

COLUMNS_HELP = """\
CSV columns by scenario kind (header row always present, LF line endings,
floats with 17 significant digits):

  propagate      t, U{ij}_re, U{ij}_im, U{ij}_abs for every entry, oracle_error, bound
  converge       order, term_norm, oracle_error, contour_error
  kaon           t, U{ab}_re/_im and exact_{ab}_re/_im for ab in SS SL LS LL,
                 U2_SL_re, U2_SL_im
  bch            lambda, W{ij}_re/_im for 11 12 21 22, det_re, det_im, y_re, y_im
  contour-check  t, nodes, contour_error

sweep prepends sweep_value and appends error (empty on success).

Exit codes: 0 success, 2 parse error, 3 validation error, 4 compute error.
SPECTRAL_DECAY_THREADS caps sweep parallelism.
"""


def _fail(code: int, exc: Exception) -> int:
    category = {EXIT_PARSE: "parse", EXIT_VALIDATION: "validation", EXIT_COMPUTE: "compute"}[code]
    payload = {
        "error": type(exc).__name__,
        "category": category,
        "message": str(exc),
        "context": getattr(exc, "context", {}),
    }
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"--values: {exc}", {"field": "--values"}) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-decay",
        description="Resolvent perturbation series and BCH factorization scenarios.",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "execute one scenario file"),
        ("sweep", "execute a scenario once per value of a scalar parameter"),
    ):
        p = sub.add_parser(name, help=helptext, epilog=COLUMNS_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", help="output path prefix (overrides the scenario's 'output')")
        p.add_argument("--seed", type=int, default=None, help="reserved for randomized self-test kinds")
        if name == "sweep":
            p.add_argument("--param", required=True, help="t, order, epsilon, or a bch field")
            p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load(args.scenario, output=args.out)
        if args.command == "run":
            report = runner.run(scenario)
            csv_path, json_path = runner.output_paths(scenario.output)
            write_atomic({csv_path: report.to_csv(), json_path: report.to_json()})
            print(json.dumps({"csv": csv_path, "report": json_path}))
        else:
            values = _parse_values(args.values)
            header, rows = runner.run_sweep(scenario, args.param, values)
            csv_path = scenario.output + ".csv"
            write_atomic({csv_path: csv_text(header, rows)})
            print(json.dumps({"csv": csv_path}))
    except ParseError as exc:
        return _fail(EXIT_PARSE, exc)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc)
    except ComputeError as exc:
        return _fail(EXIT_COMPUTE, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
