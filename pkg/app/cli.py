"""Command-line entry point: ``snrobust <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 IO/data error, 3 numerical or
convergence error (including any alpha that failed).
"""

import argparse
import logging
import sys
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.config import Settings, get_settings
from app.exceptions import SnRobustError, UsageError
from app.models.domain import ContaminationScheme, IfKind, SnParams
from app.models.requests import Command, RunConfig
from app.services import report_service
from app.services.analysis_service import AnalysisService
from app.services.asymptotics import are_table, compare_are
from app.services.data_service import DataService
from app.services.hypothesis import parse_hypothesis, power_table
from app.services.montecarlo import CONTAMINANTS, bias_mse_study, level_power_study
from app.services.robustness import if_curve

logger = logging.getLogger("app.cli")

TABLE_ALPHAS = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]
ARE_THETAS = ["0,1,1", "0,1,0", "0,1,-1"]
POWER_DISTANCES = [3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 7.0, 8.0, 9.0]
SIMULATION_PROFILES = {
    "smoke": {"n": 50, "reps": 10},
    "full": {"n": 100, "reps": 500},
}

Outcome = Tuple[Dict[str, Any], List[Dict[str, Any]], Dict[str, Any], bool]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports errors as UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _theta(text: str) -> SnParams:
    values = _float_list(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected mu,sigma,gamma, got {text!r}")
    try:
        return SnParams.from_array(values)
    except SnRobustError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--alpha", type=_float_list, default=None, help="comma-separated alpha values")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--output", default=None, help="output file (stdout when omitted)")
    common.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")

    data = _Parser(add_help=False)
    data.add_argument("--input", required=True, help="CSV file with a header row")
    data.add_argument("--column", required=True, help="column holding the observations")
    data.add_argument("--drop-outliers", action="store_true", help="also analyse the box-plot-filtered sample")

    parser = _Parser(prog="snrobust", description="Robust MDPDE inference for skew-normal data.")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = commands.add_parser("fit", parents=[common, data], help="fit the model at each alpha")
    fit.add_argument("--optimizer", choices=["gd", "ga"], default="gd", help="gradient descent or genetic algorithm")

    test = commands.add_parser("test", parents=[common, data], help="Wald-type test at each alpha")
    test.add_argument("--hypothesis", required=True, help="gamma=<v>, sigma=<v> or mu=<v>")

    simulate = commands.add_parser("simulate", parents=[common], help="Monte Carlo bias/MSE or level/power study")
    simulate.add_argument("--design", choices=["bias-mse", "level-power"], default="bias-mse")
    simulate.add_argument("--profile", choices=sorted(SIMULATION_PROFILES), default="smoke")
    simulate.add_argument("--contamination", choices=sorted(CONTAMINANTS), default="right")
    simulate.add_argument("--epsilon", type=float, default=None, help="contamination proportion")
    simulate.add_argument("--theta", type=_theta, default=SnParams(0.0, 1.0, 5.0), help="true mu,sigma,gamma")
    simulate.add_argument("--null-theta", type=_theta, default=SnParams(0.0, 1.0, 0.0))
    simulate.add_argument("--alt-theta", type=_theta, default=SnParams(0.0, 1.0, 1.0))
    simulate.add_argument("--gamma0", type=float, default=0.0)
    simulate.add_argument("--tau0", type=float, default=0.05)
    simulate.add_argument("--n", type=int, default=None, help="sample size (overrides the profile)")
    simulate.add_argument("--reps", type=int, default=None, help="replications (overrides the profile)")
    simulate.add_argument("--workers", type=int, default=None, help="worker processes")

    diagnose = commands.add_parser("diagnose", parents=[common], help="influence-function curves")
    diagnose.add_argument("--kind", choices=[k.value for k in IfKind], default=IfKind.ESTIMATOR_IF.value)
    diagnose.add_argument("--theta", type=_theta, default=SnParams(0.0, 1.0, 1.0))
    diagnose.add_argument("--start", type=float, default=-10.0)
    diagnose.add_argument("--stop", type=float, default=10.0)
    diagnose.add_argument("--step", type=float, default=0.5)
    diagnose.add_argument("--hypothesis", default=None, help="null for test_if2/test_pif (default gamma=<theta gamma>)")
    diagnose.add_argument("--d", type=_float_list, default=None, help="contiguous direction d1,d2,d3")
    diagnose.add_argument("--tau0", type=float, default=0.05)

    are = commands.add_parser("are", parents=[common], help="asymptotic relative efficiency table")
    are.add_argument("--theta", type=_theta, action="append", default=None, help="repeatable mu,sigma,gamma")

    power = commands.add_parser("power", parents=[common], help="asymptotic contiguous power table")
    power.add_argument("--theta0", type=_theta, default=SnParams(0.0, 1.0, 0.0))
    power.add_argument("--hypothesis", default="gamma=0")
    power.add_argument("--d", type=_float_list, default=POWER_DISTANCES, help="comma-separated distances")
    power.add_argument("--tau0", type=float, default=0.05)
    return parser


def _run_config(args: argparse.Namespace, alphas: Sequence[float]) -> RunConfig:
    try:
        return RunConfig(
            command=Command(args.command),
            input_path=getattr(args, "input", None),
            column=getattr(args, "column", None),
            alpha_list=list(alphas),
            seed=args.seed,
            output_path=args.output,
            format=args.format,
            drop_outliers=getattr(args, "drop_outliers", False),
            hypothesis=getattr(args, "hypothesis", None),
        )
    except ValidationError as e:
        raise UsageError(str(e)) from e


def cmd_fit(cfg: RunConfig, args: argparse.Namespace, settings: Settings) -> Outcome:
    data_service = DataService()
    try:
        sample, skipped = data_service.ingest_csv(cfg.input_path, cfg.column)
    finally:
        data_service.close()
    analysis = AnalysisService(settings).fit_grid(
        sample, cfg.alpha_list, cfg.drop_outliers, optimizer=args.optimizer, seed=cfg.seed
    )
    analysis.skipped = skipped
    return analysis.as_record(), analysis.as_rows(), {"runtime_seconds": analysis.runtime_seconds}, analysis.failed


def cmd_test(cfg: RunConfig, args: argparse.Namespace, settings: Settings) -> Outcome:
    hyp = parse_hypothesis(cfg.hypothesis)
    data_service = DataService()
    try:
        sample, skipped = data_service.ingest_csv(cfg.input_path, cfg.column)
    finally:
        data_service.close()
    analysis = AnalysisService(settings).test_grid(sample, cfg.alpha_list, hyp, cfg.drop_outliers)
    analysis.skipped = skipped
    return analysis.as_record(), analysis.as_rows(), {"runtime_seconds": analysis.runtime_seconds}, analysis.failed


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace, settings: Settings) -> Outcome:
    profile = SIMULATION_PROFILES[args.profile]
    n = args.n or profile["n"]
    reps = args.reps or profile["reps"]
    workers = args.workers or settings.workers
    common = dict(
        n=n,
        reps=reps,
        alpha_grid=cfg.alpha_list,
        fit_cfg=settings.gd_config(),
        seed=cfg.seed,
        workers=workers,
        quad=settings.quadrature_spec(),
        trunc_halfwidth=settings.trunc_halfwidth,
    )
    if args.design == "bias-mse":
        epsilon = 0.1 if args.epsilon is None else args.epsilon
        scheme = ContaminationScheme(base=args.theta, contaminant=CONTAMINANTS[args.contamination], epsilon=epsilon)
        report = bias_mse_study(scheme, **common)
    else:
        epsilon = 0.0 if args.epsilon is None else args.epsilon
        report = level_power_study(
            args.null_theta, args.alt_theta, epsilon=epsilon, gamma0=args.gamma0, tau0=args.tau0, **common
        )
    timing = {"runtime_seconds": report.runtime_seconds}
    return report_service.simulation_record(report), report_service.simulation_rows(report), timing, bool(report.warnings)


def cmd_diagnose(cfg: RunConfig, args: argparse.Namespace, settings: Settings) -> Outcome:
    if args.step <= 0 or args.stop <= args.start:
        raise UsageError("diagnose needs --step > 0 and --stop > --start")
    kind = IfKind(args.kind)
    theta = args.theta
    grid = np.arange(args.start, args.stop + 0.5 * args.step, args.step)
    hyp, direction = None, None
    if kind is not IfKind.ESTIMATOR_IF:
        hyp = parse_hypothesis(args.hypothesis or f"gamma={theta.gamma:g}")
    if kind is IfKind.TEST_PIF:
        if args.d is not None and len(args.d) != 3:
            raise UsageError("--d needs three components")
        direction = args.d or (4.0 * np.asarray(hyp.jacobian(theta), dtype=float).reshape(3)).tolist()

    started = time.time()
    curves = [
        if_curve(
            kind,
            theta,
            alpha,
            grid,
            hyp,
            direction,
            args.tau0,
            settings.quadrature_spec(),
            settings.trunc_halfwidth,
            settings.singular_policy,
        )
        for alpha in cfg.alpha_list
    ]
    rows = report_service.if_curve_rows(curves)
    payload = {
        "kind": kind.value,
        "theta": theta.as_dict(),
        "alphas": cfg.alpha_list,
        "hypothesis": hyp.description if hyp else None,
        "d": direction,
        "tau0": args.tau0 if kind is IfKind.TEST_PIF else None,
        "rows": rows,
    }
    return payload, rows, {"runtime_seconds": time.time() - started}, False


def cmd_are(cfg: RunConfig, args: argparse.Namespace, settings: Settings) -> Outcome:
    thetas = args.theta or [_theta(text) for text in ARE_THETAS]
    started = time.time()
    table = are_table(
        thetas,
        cfg.alpha_list,
        settings.quadrature_spec(),
        settings.trunc_halfwidth,
        settings.cond_limit,
        settings.singular_policy,
    )
    rows = report_service.are_rows(table)
    payload = {"alphas": table.alphas, "singular_policy": settings.singular_policy, "rows": rows}
    comparison = compare_are(
        table,
        quad=settings.quadrature_spec(),
        trunc_halfwidth=settings.trunc_halfwidth,
        cond_limit=settings.cond_limit,
        singular_policy=settings.singular_policy,
    )
    if comparison.compared:
        payload["reference_check"] = comparison.as_record()
    return payload, rows, {"runtime_seconds": time.time() - started}, False


def cmd_power(cfg: RunConfig, args: argparse.Namespace, settings: Settings) -> Outcome:
    hyp = parse_hypothesis(args.hypothesis)
    started = time.time()
    table = power_table(
        args.theta0,
        hyp,
        args.d,
        cfg.alpha_list,
        args.tau0,
        settings.quadrature_spec(),
        settings.trunc_halfwidth,
        settings.singular_policy,
    )
    rows = report_service.power_rows(table)
    payload = {
        "theta0": args.theta0.as_dict(),
        "hypothesis": table.hypothesis,
        "tau0": table.tau0,
        "alphas": table.alphas,
        "marginal": {f"{alpha:g}": flag for alpha, flag in table.marginal.items()},
        "rows": rows,
    }
    return payload, rows, {"runtime_seconds": time.time() - started}, False


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace, Settings], Outcome]] = {
    "fit": cmd_fit,
    "test": cmd_test,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
    "are": cmd_are,
    "power": cmd_power,
}


def _default_alphas(command: str, settings: Settings) -> List[float]:
    if command in ("are", "power"):
        return TABLE_ALPHAS
    if command == "diagnose":
        return [0.0, 0.5]
    if command == "simulate":
        return [0.0, 0.1, 0.3, 0.5, 0.7, 1.0]
    return list(settings.alpha_grid)


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    settings = get_settings()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code

    _configure_logging(args.log_level or settings.log_level)
    try:
        cfg = _run_config(args, args.alpha if args.alpha is not None else _default_alphas(args.command, settings))
        payload, rows, timing, failed = COMMANDS[args.command](cfg, args, settings)
        document = {"command": cfg.command.value, "config": cfg.model_dump(mode="json", exclude={"output_path"}), **payload}
        digits = settings.significant_digits
        if cfg.output_path and cfg.format == "json":
            report_service.write_json(cfg.output_path, document, timing, digits)
        elif cfg.output_path:
            report_service.write_csv(cfg.output_path, rows, digits)
        elif cfg.format == "json":
            sys.stdout.write(report_service.render_json(document, timing, digits) + "\n")
        else:
            sys.stdout.write(report_service.render_csv(rows, digits))
    except SnRobustError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code

    if failed:
        logger.warning("Some alpha values did not complete; see the report")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
