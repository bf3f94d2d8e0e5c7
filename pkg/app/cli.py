"""Command-line harness.

Exit codes: 0 ok, 1 acceptance failure, 2 input or model error, 3 numeric failure.
"""

import argparse
import hashlib
import json
import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from app.analysis.acceptance import TAGS, run_acceptance
from app.analysis.solvers import Scheme
from app.analysis.studies import (
    CONVERGENCE_COLUMNS,
    EVANS_COLUMNS,
    EXPANSION_COLUMNS,
    STABILITY_COLUMNS,
    convergence_study,
    evans_study,
    expansion_study,
    stability_study,
)
from app.core.config import settings
from app.core.errors import LabError, SchemaError
from app.core.logging import configure_logging, run_scope
from app.models.loader import load_model
from app.models.registry import BUILTINS
from app.schemas.report import write_csv, write_report

logger = logging.getLogger("app.cli")

PARAM_NAMES = sorted({name for b in BUILTINS.values() for name in b.defaults})
TOLERANCES = {"eig": "EIG_TOL", "rank": "RANK_TOL", "uniform": "UNIFORM_THRESHOLD", "zero": "ZERO_TOL",
              "cluster": "CLUSTER_RADIUS", "newton": "NEWTON_TOL"}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser, model: bool = True) -> None:
    if model:
        p.add_argument("--model", required=True, help="model file path or builtin:<name>")
        for name in PARAM_NAMES:
            p.add_argument(f"--{name}", type=float, default=None, dest=f"param_{name}",
                           help="builtin parameter override")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                   help=f"tolerance override; names: {', '.join(TOLERANCES)}")
    p.add_argument("--log-level", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Boundary layer stability and small-viscosity lab.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stability", help="uniform Lopatinski scan and boundary Cauchy diagnostics")
    _common(p)
    p.add_argument("--grid", type=int, default=None, help="angular points per γ-level")
    p.add_argument("--gamma-levels", type=_floats, default=None)
    p.add_argument("--no-cauchy", action="store_true")

    p = sub.add_parser("evans", help="Evans function and degeneracy scan near ζ = 0")
    _common(p)
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--radii", type=int, default=6)

    p = sub.add_parser("expand", help="asymptotic expansion and its residual table")
    _common(p)
    p.add_argument("--order", type=int, default=1, help="number of retained profiles")
    p.add_argument("--eps", type=_floats, default=None)
    p.add_argument("--dx", type=float, default=0.02)
    p.add_argument("--x-max", type=float, default=6.0)
    p.add_argument("--t-final", type=float, default=1.0)
    p.add_argument("--mode", type=float, default=1.0, help="tangential wavenumber for d = 2")

    p = sub.add_parser("converge", help="small-viscosity convergence study (d = 1)")
    _common(p)
    p.add_argument("--eps", type=_floats, default=None)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.CRANK_NICOLSON_CENTERED.value)
    p.add_argument("--per-epsilon", type=int, default=8, help="grid cells per ε")
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--weighted", action="store_true", help="also run the weighted estimate")

    p = sub.add_parser("accept", help="run the acceptance suite")
    _common(p, model=False)
    p.add_argument("--only", default=None, help=f"comma-separated tags: {', '.join(TAGS)}")
    p.add_argument("--quick", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def run_id_for(args: argparse.Namespace) -> str:
    """Stable per invocation so that reruns reproduce the same bytes."""
    payload = {k: str(v) for k, v in sorted(vars(args).items()) if k not in ("out", "jobs", "log_level")}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _apply_tolerances(items: list[str]) -> None:
    for item in items:
        name, _, value = item.partition("=")
        field = TOLERANCES.get(name.strip().lower())
        if field is None or not value:
            raise SchemaError(f"bad --tol {item!r}; expected NAME=VALUE with NAME in {sorted(TOLERANCES)}")
        try:
            setattr(settings, field, float(value))
        except ValueError as exc:
            raise SchemaError(f"bad --tol {item!r}: {value!r} is not a number") from exc


@contextmanager
def tolerance_scope(items: list[str]) -> Iterator[None]:
    """Apply --tol overrides for one run and put the previous settings back afterwards."""
    saved = {field: getattr(settings, field) for field in TOLERANCES.values()}
    try:
        _apply_tolerances(items)
        yield
    finally:
        for field, value in saved.items():
            setattr(settings, field, value)


def _model(args: argparse.Namespace):
    overrides = {
        name: getattr(args, f"param_{name}")
        for name in PARAM_NAMES
        if getattr(args, f"param_{name}") is not None
    }
    return load_model(args.model, **overrides)


def _finish(report, out: Path, stem: str, columns: list[str] | None, rows: list[dict], run_id: str) -> None:
    report.runId = run_id
    write_report(report, out / f"{stem}.json")
    if columns is not None:
        write_csv(out / f"{stem}.csv", columns, rows)
    logger.info("wrote %s", out / f"{stem}.json")


def cmd_stability(args, out: Path, run_id: str) -> int:
    model = _model(args)
    report, rows = stability_study(model, args.grid, args.gamma_levels, args.jobs, cauchy=not args.no_cauchy)
    report.runId = run_id
    write_report(report, out / "report.json")
    write_csv(out / "scan.csv", STABILITY_COLUMNS, rows)
    lop = report.lopatinski
    print(f"{model.name}: {lop.case} verdict={lop.verdict} min|det|={lop.minAbsDet}")
    if report.cauchy is not None:
        c = report.cauchy
        print(f"  cauchy: evolutionary={c.evolutionary} semisimple={c.semisimple} "
              f"constantMultiplicity={c.constantMultiplicity}")
    return 0


def cmd_evans(args, out: Path, run_id: str) -> int:
    model = _model(args)
    report, rows = evans_study(model, args.radius, args.radii, args.grid, args.jobs)
    _finish(report, out, "evans", EVANS_COLUMNS, rows, run_id)
    s = report.summary
    print(f"{model.name}: min R/(gamma+rho^2) = {s.minRatio:.6g} (refined {s.refinedMinRatio:.6g}), "
          f"gamma-ray slope {s.gammaRaySlope:.3f}")
    return 0


def cmd_expand(args, out: Path, run_id: str) -> int:
    model = _model(args)
    report, rows = expansion_study(model, args.order, args.eps, args.x_max, args.t_final, args.dx, args.mode)
    _finish(report, out, "expand", EXPANSION_COLUMNS if rows else None, rows, run_id)
    if report.residualSlope is not None:
        print(f"{model.name}: residual slope {report.residualSlope:.3f} for M = {report.order}")
    else:
        print(f"{model.name}: outer residual {report.outerResidual:.3e}")
    return 0


def cmd_converge(args, out: Path, run_id: str) -> int:
    model = _model(args)
    report, rows = convergence_study(
        model, args.eps, args.x_max, args.t_final, args.per_epsilon, Scheme(args.scheme), args.weighted, args.jobs
    )
    _finish(report, out, "converge", CONVERGENCE_COLUMNS, rows, run_id)
    print(f"{model.name}: sup slope {report.supSlope:.3f}, L2 slope {report.l2Slope:.3f}, monotone={report.monotone}")
    return 0


def cmd_accept(args, out: Path, run_id: str) -> int:
    only = {t.strip() for t in args.only.split(",") if t.strip()} if args.only else None
    report = run_acceptance(only, args.quick, args.seed, args.jobs)
    report.runId = run_id
    write_report(report, out / "accept.json")
    for c in report.criteria:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.number:2d} {c.tag:<10} {c.title} ({c.seconds:.1f}s)")
    return 0 if report.passed else 1


COMMANDS = {
    "stability": cmd_stability,
    "evans": cmd_evans,
    "expand": cmd_expand,
    "converge": cmd_converge,
    "accept": cmd_accept,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("app.main:app", host=args.host, port=args.port)
        return 0

    configure_logging(args.log_level or settings.LOG_LEVEL)
    args.jobs = settings.JOBS if args.jobs is None else args.jobs
    args.seed = settings.SEED if args.seed is None else args.seed
    out = Path(args.out or settings.OUT_DIR)
    with run_scope(run_id_for(args), getattr(args, "model", None)) as run_id:
        try:
            with tolerance_scope(args.tol):
                return COMMANDS[args.command](args, out, run_id)
        except LabError as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
