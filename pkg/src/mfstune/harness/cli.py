"""``mfstune`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical or domain error
(including rank failure and failed oracle checks), 4 resume-integrity error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    GeometryError,
    InvalidArgument,
    MfsTuneError,
    RankFailure,
    ResumeIntegrityError,
)
from ..geometry import ThetaVector
from ..oracle import Dipole
from .commands import cmd_compare, cmd_forward, cmd_oracle_check, cmd_report, cmd_tune, format_table
from .config import PRESETS, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESUME = 0, 2, 3, 4


def _floats(text: str, n: int) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}") from None
    if len(values) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {len(values)}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfstune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named parameter profile (default: desk)")
        p.add_argument("--seed", type=int)
        if out:
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("forward", help="single MFS solve scored against the analytic potential")
    common(p, out=False)
    p.add_argument("--theta", required=True, type=lambda s: _floats(s, 5), help="t1i,t1d,t2i,t2d,t3i")
    p.add_argument("--position", required=True, type=lambda s: _floats(s, 3), help="dipole position x,y,z (m)")
    p.add_argument("--moment", required=True, type=lambda s: _floats(s, 3), help="dipole moment (A m)")

    p = sub.add_parser("oracle-check", help="self-consistency checks of the layered-sphere potential")
    common(p, out=False)
    p.add_argument("--stability-tol", type=float, default=1e-10)

    for name, text in (("tune", "one tuning run"), ("compare", "all strategies over paired repetitions")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--strategy", choices=("sko", "random"))
        arm = p.add_mutually_exclusive_group()
        arm.add_argument("--preemptive", dest="preemptive", action="store_true", default=None)
        arm.add_argument("--standard", dest="preemptive", action="store_false")
        p.add_argument("--region", type=int, choices=range(1, 7), metavar="{1..6}")
        p.add_argument("--repetitions", type=int)
        if name == "tune":
            p.add_argument("--resume", action="store_true", help="continue an existing ledger")
            p.add_argument("--ledger", help="ledger file (default: derived from --out)")

    p = sub.add_parser("report", help="rebuild the comparison table from saved ledgers")
    p.add_argument("--out", required=True)
    return parser


def _config(args):
    config = load_config(args.config, args.preset)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "strategy", None):
        overrides["strategy"] = args.strategy
    if getattr(args, "preemptive", None) is not None:
        overrides["preemptive"] = args.preemptive
    if getattr(args, "region", None):
        overrides["region"] = args.region
    if getattr(args, "repetitions", None):
        overrides["repetitions"] = args.repetitions
    if getattr(args, "out", None):
        overrides["output"] = args.out
    return config.replace(**overrides) if overrides else config


def _dispatch(args) -> int:
    if args.command == "report":
        print(format_table(cmd_report(args.out)["rows"]), end="")
        return EXIT_OK
    config = _config(args)
    if args.command == "forward":
        try:
            theta = ThetaVector.from_array(args.theta)
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None
        report = cmd_forward(config, theta, Dipole(args.position, args.moment))
        print("\n".join(report.lines()))
        return EXIT_OK
    if args.command == "oracle-check":
        results = cmd_oracle_check(config, args.stability_tol)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC
    if args.command == "tune":
        result, path = cmd_tune(config, resume=args.resume, path=args.ledger)
        print(json.dumps({
            "ledger": str(path),
            "best_theta": [float(x) for x in result.best_theta.as_array()],
            "best_mean": result.best_mean,
            "distinct": result.distinct,
            "evaluations": result.ledger.j_used,
        }, indent=2))
        return EXIT_OK
    if args.command == "compare":
        doc = cmd_compare(config)
        print(format_table(doc["rows"]), end="")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except ResumeIntegrityError as exc:
        print(f"resume error: {exc}", file=sys.stderr)
        return EXIT_RESUME
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankFailure, DomainError, ConvergenceError, MfsTuneError, ArithmeticError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
