"""Command-line surface of the Sobolev lab.

Run ``python -m app.cli --help``. Exit codes: 0 all checks passed, 1 a check
failed, 2 usage error, 3 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from app.core.config import settings
from app.schemas.reports import SuiteReport
from app.schemas.run import Command, OutputFormat, RunConfig
from app.services.catalog import catalog, default_grid
from app.services.constants import constant_table
from app.services.geometry import Patch, export_csv
from app.services.reporting import emit, make_envelope
from app.services.suites import sobolev_params, verification_service
from app.utils.errors import (
    DegenerateFunctionError, DomainError, EmptyFamilyError, ImmersionError,
    InsufficientNeighborsError, NonConvergenceError, NonMinimalPatchError, NoBoundaryError,
    PositivityError, SobolevLabException, UnknownSurfaceError, UsageError,
)

logger = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

USAGE_ERRORS = (UsageError, DomainError, UnknownSurfaceError, EmptyFamilyError,
                NonMinimalPatchError, PositivityError, NoBoundaryError)
NUMERICAL_ERRORS = (NonConvergenceError, ImmersionError, InsufficientNeighborsError, DegenerateFunctionError)

VERIFY_SUITES = ("identities", "quadrature-check", "sobolev-quotient", "isoperimetric",
                 "alpha-sweep", "ot-experiment")

# Options each suite accepts, by RunConfig field
SUITE_OPTIONS: Dict[str, List[str]] = {
    "identities": [],
    "quadrature-check": ["seed"],
    "sobolev-quotient": ["surface", "p", "seeds", "seed", "grid", "permissive"],
    "isoperimetric": ["seeds", "seed"],
    "alpha-sweep": ["n", "m", "js"],
    "ot-experiment": ["surface", "p", "n_points", "epsilon", "seed"],
    "geometry": ["points", "seed"],
}


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _flag(text: str) -> bool:
    value = text.strip().lower()
    if value not in ("1", "0", "true", "false", "yes", "no"):
        raise ValueError(f"not a boolean: {text}")
    return value in ("1", "true", "yes")


# Keys accepted in a key=value config file
CONFIG_KEYS: Dict[str, Callable[[str], Any]] = {
    "n": int, "m": int, "p": float, "t": float, "j": _int_list, "surface": str,
    "grid": _int_list, "seeds": int, "n_points": int, "epsilon": float, "seed": int,
    "points": int, "format": str, "output": str, "chain": _flag, "permissive": _flag,
    "no_timestamp": _flag, "quad_tol": float, "patch_tol": float, "sinkhorn_tol": float,
}


def load_config_file(path: str) -> Dict[str, Any]:
    """Read key=value lines; blank lines and # comments are skipped."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise UsageError(f"Cannot read config file {path}", {"reason": str(e)})
    values: Dict[str, Any] = {}
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise UsageError(f"Bad config line {number}: {raw!r}", {"known": sorted(CONFIG_KEYS)})
        try:
            values[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as e:
            raise UsageError(f"Bad value for {key} on config line {number}", {"reason": str(e)})
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=None,
                        help="Output format (default: table)")
    common.add_argument("--output", default=None, help="Write the report to this path")
    common.add_argument("--seed", type=int, default=None, help="Base seed (default: SOBOLEV_LAB_SEED)")
    common.add_argument("--config", default=None, help="key=value file pre-populating flags")
    common.add_argument("--no-timestamp", action="store_true", default=None,
                        help="Omit the timestamp so identical runs give identical JSON")
    common.add_argument("--permissive", action="store_true", default=None,
                        help="Evaluate constants outside their theorem ranges")
    common.add_argument("--quad-tol", type=float, default=None, help="1-D quadrature tolerance")
    common.add_argument("--patch-tol", type=float, default=None, help="Patch quadrature tolerance")
    common.add_argument("--sinkhorn-tol", type=float, default=None, help="Marginal residual tolerance")
    common.add_argument("--debug", action="store_true", help="Verbose logging")

    parser = argparse.ArgumentParser(prog="sobolev-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    constants_cmd = sub.add_parser("constants", parents=[common], help="Table of constants for (n, m, p)")
    constants_cmd.add_argument("--n", type=int, default=None)
    constants_cmd.add_argument("--m", type=int, default=None, help="Codimension (default 1)")
    constants_cmd.add_argument("--p", type=float, default=None)
    constants_cmd.add_argument("--t", type=float, default=None, help="Concavity split in (0,1)")
    constants_cmd.add_argument("--chain", action="store_true", default=None,
                               help="Add the MS > C > S > AT chain")

    sub.add_parser("asymptotics", parents=[common], help="Large-n ratios and the K limit")

    verify = sub.add_parser("verify", parents=[common], help="Run a verification suite")
    verify.add_argument("suite", choices=VERIFY_SUITES)
    verify.add_argument("--surface", default=None,
                        help="Catalog surface; sobolev-quotient on flat_ball with --p 2 adds the Euclidean recovery checks")
    verify.add_argument("--n", type=int, default=None)
    verify.add_argument("--m", type=int, default=None)
    verify.add_argument("--p", type=float, default=None)
    verify.add_argument("--j", type=_int_list, default=None, help="Comma-separated density exponents")
    verify.add_argument("--grid", type=_int_list, default=None, help="Comma-separated grid counts")
    verify.add_argument("--seeds", type=int, default=None, help="Number of seeded test functions")
    verify.add_argument("--n-points", type=int, default=None)
    verify.add_argument("--epsilon", type=float, default=None)

    geometry = sub.add_parser("geometry", parents=[common], help="Catalog geometry checks and export")
    geometry.add_argument("action", choices=["check-minimal", "export"])
    geometry.add_argument("--surface", default=None)
    geometry.add_argument("--grid", type=_int_list, default=None)
    geometry.add_argument("--points", type=int, default=None, help="Seeded points per surface")
    return parser


def _merge_config(args: argparse.Namespace) -> None:
    """Fill flags left unset from the config file; flags win."""
    if not args.config:
        return
    for key, value in load_config_file(args.config).items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _apply_tolerances(args: argparse.Namespace) -> Dict[str, float]:
    for name in ("quad_tol", "patch_tol", "sinkhorn_tol"):
        value = getattr(args, name, None)
        if value is not None:
            if value <= 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive", {name: value})
            setattr(settings, name, value)
    return {"quad_tol": settings.quad_tol, "patch_tol": settings.patch_tol,
            "sinkhorn_tol": settings.sinkhorn_tol}


def run_config(args: argparse.Namespace) -> RunConfig:
    try:
        fmt = OutputFormat(args.format or OutputFormat.TABLE.value)
    except ValueError:
        raise UsageError(f"Unknown format: {args.format}", {"known": [f.value for f in OutputFormat]})
    return RunConfig(
        command=Command(args.command),
        action=getattr(args, "suite", None) or getattr(args, "action", None),
        n=getattr(args, "n", None), m=getattr(args, "m", None), p=getattr(args, "p", None),
        t=getattr(args, "t", None), j=getattr(args, "j", None),
        surface=getattr(args, "surface", None), grid=getattr(args, "grid", None),
        seeds=getattr(args, "seeds", None), n_points=getattr(args, "n_points", None),
        epsilon=getattr(args, "epsilon", None), points=getattr(args, "points", None),
        seed=settings.seed if args.seed is None else args.seed,
        tolerances=_apply_tolerances(args),
        chain=bool(getattr(args, "chain", False)), permissive=bool(args.permissive),
        format=fmt, output=args.output,
    )


def _suite_options(suite: str, config: RunConfig) -> Dict[str, Any]:
    fields = {
        "surface": config.surface, "p": config.p, "seeds": config.seeds, "seed": config.seed,
        "grid": config.grid, "n_points": config.n_points, "epsilon": config.epsilon,
        "n": config.n, "m": config.m, "js": config.j, "points": config.points,
        "permissive": config.permissive or None,
    }
    return {k: fields[k] for k in SUITE_OPTIONS[suite] if fields[k] is not None}


def cmd_constants(config: RunConfig):
    if config.n is None or config.p is None:
        raise UsageError("constants needs --n and --p", {"n": config.n, "p": config.p})
    m = 1 if config.m is None else config.m
    params = sobolev_params(config.n, m, config.p, config.t)
    table = constant_table(params.n, params.m, params.p, params.t,
                           permissive=config.permissive, chain=config.chain)
    # comparison verdicts are informational; only the chain is a pass/fail check
    passed = all(c.strictly_ordered for c in table.chains) if table.chains else None
    return table, passed


def cmd_asymptotics(config: RunConfig):
    report = verification_service.asymptotics_report()
    return report, all(c.passed for c in report.checks)


def cmd_verify(config: RunConfig):
    report = verification_service.run(config.action, **_suite_options(config.action, config))
    return report, report.passed


def cmd_geometry(config: RunConfig):
    if config.action == "check-minimal":
        report = verification_service.run("geometry", **_suite_options("geometry", config))
        return report, report.passed
    surface = config.surface or "catenoid"
    chart = catalog(surface)
    patch = Patch(chart, config.grid or default_grid(chart))
    path = config.output or f"{surface}.csv"
    count = export_csv(patch, path)
    report = SuiteReport(suite="geometry-export", passed=True, checks=[],
                         artifacts={"surface": surface, "path": path, "nodes": count})
    return report, None


COMMANDS = {
    Command.CONSTANTS: cmd_constants,
    Command.ASYMPTOTICS: cmd_asymptotics,
    Command.VERIFY: cmd_verify,
    Command.GEOMETRY: cmd_geometry,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if (args.debug or settings.debug) else logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        _merge_config(args)
        config = run_config(args)
        payload, passed = COMMANDS[config.command](config)
    except USAGE_ERRORS as e:
        print(f"usage error: {e.message} {e.details}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as e:
        print(f"numerical failure: {e.message} {e.details}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SobolevLabException as e:
        print(f"check failure: {e.message} {e.details}", file=sys.stderr)
        return EXIT_FAIL

    envelope = make_envelope(config, payload, passed, timestamp=not args.no_timestamp)
    report_path = None if config.command == Command.GEOMETRY and config.action == "export" else config.output
    text = emit(envelope, payload, config.format, report_path)
    if report_path is None:
        sys.stdout.write(text)
    if passed is False:
        failed = [c.name for c in getattr(payload, "checks", []) if not c.passed]
        print(f"failed checks: {failed}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
