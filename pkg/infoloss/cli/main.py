"""
infoloss command line

    infoloss loss|sweep|mc|cascade|oracle|build-tight <config.json>
        [--json PATH] [--csv PATH] [--seed N] [--tol BITS] [--workers N]
        [--log-level LEVEL] [--metrics] [--dump-config PATH]

Reports go to stdout, logs to stderr. Exit codes: 0 success, 1 estimator
failure, 2 configuration error, 3 function validation failure, 4 quadrature
did not converge.
"""

import sys
import math
import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from dotenv import find_dotenv, load_dotenv

from infoloss.core.cascade import cascade_loss, verify_additivity
from infoloss.core.estimators import histogram_oracle, mc_loss
from infoloss.core.exceptions import ConfigurationError, InfoLossException, QuadratureConvergenceError
from infoloss.core.loss_engine import info_loss, info_loss_via_W, tightness_check
from infoloss.core.metrics import get_metrics_text
from infoloss.core.reference import closed_form_loss
from infoloss.core.settings import configure_logging, settings
from infoloss.core.tight_builder import build_cdf_piecewise, build_tight
from infoloss.densities.base import truncated_support
from infoloss.services import report_writer
from infoloss.services.config_parser import (
    ExperimentConfig,
    apply_override,
    build_density,
    build_function,
    build_histogram,
    build_mc,
    build_quadrature,
    dump_config,
    load_config,
)

logger = logging.getLogger(__name__)


@dataclass
class RunOptions:
    """Command-line flags shared by every sub-command."""
    json_path: Optional[str] = None
    csv_path: Optional[str] = None
    seed: Optional[int] = None
    tol: Optional[float] = None
    workers: Optional[int] = None
    dump_config_path: Optional[str] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunOptions":
        return cls(
            json_path=args.json,
            csv_path=args.csv,
            seed=args.seed,
            tol=args.tol,
            workers=args.workers,
            dump_config_path=args.dump_config,
        )


def _out(text: str):
    sys.stdout.write(text)
    sys.stdout.flush()


def _load(config_path: str, options: RunOptions) -> ExperimentConfig:
    """Read the config, apply flag overrides, and dump the result if asked."""
    config = load_config(config_path)
    if options.seed is not None:
        config = apply_override(config, "mc.seed", options.seed)
    if options.tol is not None:
        config = apply_override(config, "quadrature.abs_tol", options.tol)
    if options.dump_config_path:
        Path(options.dump_config_path).write_text(dump_config(config) + "\n", encoding="utf-8")
        logger.info(f"Wrote effective config to {options.dump_config_path}")
    return config


def _require_function(config: ExperimentConfig, command: str):
    if config.function is None:
        raise ConfigurationError(f"The {command} command needs a 'function' section")
    return build_function(config.function)


def _reference(config: ExperimentConfig) -> Optional[float]:
    if config.function is None:
        return None
    return closed_form_loss(
        config.function.model_dump(exclude_none=True),
        config.density.model_dump(exclude_none=True),
    )


def _config_payload(config: ExperimentConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json", exclude_none=True)


# ==================== Commands ====================

def cmd_loss(config_path: str, options: Optional[RunOptions] = None) -> int:
    """Both quadrature routes, the bound chain and the tightness summary."""
    options = options or RunOptions()
    config = _load(config_path, options)
    f = _require_function(config, "loss")
    d = build_density(config.density)
    qcfg = build_quadrature(config.quadrature, options.workers)

    direct = info_loss(f, d, qcfg)
    via_w = info_loss_via_W(f, d, qcfg)
    tightness = tightness_check(f, d, config.tightness.grid, config.tightness.tol, qcfg)
    reference = _reference(config)

    _out(report_writer.format_loss_summary(
        f"Information loss of '{f.name}' on {d.name}", [direct, via_w], tightness, reference
    ))
    if options.json_path:
        report_writer.write_json(options.json_path, {
            "command": "loss",
            "config": _config_payload(config),
            "reports": [direct.to_dict(), via_w.to_dict()],
            "route_gap_bits": abs(direct.loss_bits - via_w.loss_bits),
            "tightness": tightness.to_dict(),
            "reference_bits": reference,
        })
    if options.csv_path:
        report_writer.write_csv(options.csv_path, report_writer.LOSS_COLUMNS, report_writer.loss_rows([direct, via_w]))

    direct.raise_for_convergence()
    via_w.raise_for_convergence()
    return 0


def _sweep_point(config: ExperimentConfig, value: float) -> Tuple[List[Any], Optional[InfoLossException]]:
    sweep = config.sweep
    nan_row = [value] + [math.nan] * (len(report_writer.SWEEP_COLUMNS) - 1)
    try:
        point = apply_override(config, sweep.param, value)
        f = _require_function(point, "sweep")
        d = build_density(point.density)
        qcfg = build_quadrature(point.quadrature, workers=1)
        report = info_loss(f, d, qcfg)
        report.raise_for_convergence()
        mc_bits, mc_stderr = math.nan, math.nan
        if sweep.with_mc:
            estimate = mc_loss(f, d, build_mc(point.mc, workers=1), qcfg)
            mc_bits, mc_stderr = estimate.loss_bits, estimate.stderr_bits
        return [value, report.loss_bits, mc_bits, mc_stderr, *report.bounds], None
    except InfoLossException as e:
        logger.warning(f"Sweep point {sweep.param}={value:.12g} failed: {e.code}: {e.message}")
        return nan_row, e


def cmd_sweep(config_path: str, options: Optional[RunOptions] = None) -> int:
    """
    Loss, Monte Carlo estimate and bounds over a parameter grid.

    Rows follow grid order whatever the worker count. Failed points are
    written as NaN and listed under 'failed' in the JSON report.
    """
    options = options or RunOptions()
    config = _load(config_path, options)
    if config.sweep is None:
        raise ConfigurationError("The sweep command needs a 'sweep' section")
    if config.sweep.with_mc:
        build_mc(config.mc)
    grid = config.sweep.grid()
    workers = options.workers or settings.workers
    logger.info(f"Sweeping {config.sweep.param} over {len(grid)} points with {workers} workers")

    run: Callable[[float], Tuple[List[Any], Optional[InfoLossException]]] = lambda v: _sweep_point(config, v)
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, grid))
    else:
        results = [run(v) for v in grid]

    rows = [row for row, _ in results]
    failed = [
        {"index": i, "param": grid[i], "error": error.to_dict()}
        for i, (_, error) in enumerate(results) if error is not None
    ]

    if options.csv_path:
        report_writer.write_csv(options.csv_path, report_writer.SWEEP_COLUMNS, rows)
        _out(report_writer.format_sweep(config.sweep.param, rows, failed))
    else:
        _out(report_writer.render_csv(report_writer.SWEEP_COLUMNS, rows))
    if options.json_path:
        report_writer.write_json(options.json_path, {
            "command": "sweep",
            "config": _config_payload(config),
            "param": config.sweep.param,
            "columns": list(report_writer.SWEEP_COLUMNS),
            "rows": rows,
            "failed": failed,
        })

    if failed and len(failed) == len(grid):
        logger.error("Every sweep point failed")
        return results[0][1].exit_code
    return 0


def cmd_mc(config_path: str, options: Optional[RunOptions] = None) -> int:
    """Monte Carlo estimate with a mandatory seed."""
    options = options or RunOptions()
    config = _load(config_path, options)
    f = _require_function(config, "mc")
    d = build_density(config.density)
    qcfg = build_quadrature(config.quadrature, options.workers)
    mcfg = build_mc(config.mc, options.workers)

    report = mc_loss(f, d, mcfg, qcfg)
    reference = _reference(config)
    _out(report_writer.format_loss_summary(
        f"Monte Carlo loss of '{f.name}' on {d.name} (n={mcfg.n_samples}, seed={mcfg.seed})",
        [report], None, reference,
    ))
    if options.json_path:
        report_writer.write_json(options.json_path, {
            "command": "mc",
            "config": _config_payload(config),
            "reports": [report.to_dict()],
            "reference_bits": reference,
        })
    if options.csv_path:
        report_writer.write_csv(options.csv_path, report_writer.LOSS_COLUMNS, report_writer.loss_rows([report]))
    return 0


def cmd_cascade(config_path: str, options: Optional[RunOptions] = None) -> int:
    """Per-stage losses of a cascade, optionally checked against the composite."""
    options = options or RunOptions()
    config = _load(config_path, options)
    if config.cascade is None:
        raise ConfigurationError("The cascade command needs a 'cascade' section")
    stages = [build_function(spec) for spec in config.cascade.stages]
    d = build_density(config.density)
    qcfg = build_quadrature(config.quadrature, options.workers)

    report = cascade_loss(stages, d, qcfg)
    additivity = None
    if config.cascade.verify:
        if len(stages) != 2:
            raise ConfigurationError(
                "Additivity verification needs exactly two stages",
                details=f"got {len(stages)}",
            )
        additivity = verify_additivity(stages[0], stages[1], d, qcfg)

    _out(report_writer.format_cascade(report, additivity))
    if options.json_path:
        report_writer.write_json(options.json_path, {
            "command": "cascade",
            "config": _config_payload(config),
            "cascade": report.to_dict(),
            "additivity": additivity.to_dict() if additivity else None,
        })
    if options.csv_path:
        report_writer.write_csv(options.csv_path, report_writer.CASCADE_COLUMNS, report_writer.cascade_rows(report))

    if not report.converged:
        raise QuadratureConvergenceError(report, "at least one cascade stage did not converge")
    return 0


def cmd_oracle(config_path: str, options: Optional[RunOptions] = None) -> int:
    """Histogram oracle estimates per refinement level, next to the quadrature value."""
    options = options or RunOptions()
    config = _load(config_path, options)
    f = _require_function(config, "oracle")
    d = build_density(config.density)
    qcfg = build_quadrature(config.quadrature, options.workers)
    mcfg = build_mc(config.mc, options.workers)

    report = histogram_oracle(f, d, build_histogram(config.histogram), mcfg, qcfg)
    quadrature = info_loss(f, d, qcfg)
    _out(report_writer.format_oracle(report))
    _out(report_writer.format_loss_summary("Quadrature", [quadrature]))
    if options.json_path:
        report_writer.write_json(options.json_path, {
            "command": "oracle",
            "config": _config_payload(config),
            "oracle": report.to_dict(),
            "quadrature": quadrature.to_dict(),
        })
    if options.csv_path:
        report_writer.write_csv(options.csv_path, report_writer.ORACLE_COLUMNS, report_writer.oracle_rows(report))
    return 0


def cmd_build_tight(config_path: str, options: Optional[RunOptions] = None) -> int:
    """
    Build the tight function for the configured density and report its loss.

    The function table goes to --csv, or to stdout when no path is given.
    """
    options = options or RunOptions()
    config = _load(config_path, options)
    spec = config.tight
    if spec is None:
        raise ConfigurationError("The build-tight command needs a 'tight' section")
    d = build_density(config.density)
    qcfg = build_quadrature(config.quadrature, options.workers)

    if spec.offsets is not None:
        signs = spec.signs if spec.signs is not None else [1] * spec.L
        f = build_cdf_piecewise(d, spec.L, signs, spec.offsets, spec.boundaries, qcfg.mass_eps)
    else:
        f = build_tight(d, spec.L, spec.signs, spec.boundaries, qcfg.mass_eps)

    report = info_loss(f, d, qcfg)
    tightness = tightness_check(f, d, config.tightness.grid, config.tightness.tol, qcfg)
    window = truncated_support(d, qcfg.mass_eps)
    rows = report_writer.function_table_rows(f, window, spec.table_points)

    summary = report_writer.format_loss_summary(
        f"Tight function '{f.name}' on {d.name} (target {math.log2(spec.L):.6f} bits)",
        [report], tightness,
    )
    if options.csv_path:
        report_writer.write_csv(options.csv_path, report_writer.FUNCTION_TABLE_COLUMNS, rows)
        _out(summary)
    else:
        logger.info(summary.strip())
        _out(report_writer.render_csv(report_writer.FUNCTION_TABLE_COLUMNS, rows))
    if options.json_path:
        report_writer.write_json(options.json_path, {
            "command": "build-tight",
            "config": _config_payload(config),
            "function": f.describe(),
            "reports": [report.to_dict()],
            "tightness": tightness.to_dict(),
        })

    report.raise_for_convergence()
    return 0


COMMANDS: Dict[str, Callable[[str, Optional[RunOptions]], int]] = {
    "loss": cmd_loss,
    "sweep": cmd_sweep,
    "mc": cmd_mc,
    "cascade": cmd_cascade,
    "oracle": cmd_oracle,
    "build-tight": cmd_build_tight,
}


# ==================== Entry point ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infoloss",
        description="Information loss of piecewise strictly monotone functions.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=(handler.__doc__ or "").strip().splitlines()[0])
        sub.add_argument("config", help="Experiment config (JSON)")
        sub.add_argument("--json", metavar="PATH", default=None, help="Write a JSON report")
        sub.add_argument("--csv", metavar="PATH", default=None, help="Write the CSV table")
        sub.add_argument("--seed", type=int, default=None, help="Seed of randomized commands (overrides mc.seed)")
        sub.add_argument("--tol", type=float, default=None, metavar="BITS", help="Absolute quadrature tolerance in bits")
        sub.add_argument("--workers", type=int, default=None, help="Worker threads (default INFOLOSS_WORKERS)")
        sub.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        sub.add_argument("--metrics", action="store_true", help="Print metrics to stderr when done")
        sub.add_argument("--dump-config", metavar="PATH", default=None, help="Write the effective config")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(find_dotenv(usecwd=True))
    settings.reload()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level)
    settings.log_config()

    options = RunOptions.from_args(args)
    try:
        code = COMMANDS[args.command](args.config, options)
    except InfoLossException as e:
        logger.error(f"{e.code}: {e.message}" + (f" ({e.details})" if e.details else ""))
        sys.stderr.write(f"infoloss: error: {e.message}\n")
        if options.json_path and not isinstance(e, QuadratureConvergenceError):
            report_writer.write_json(options.json_path, {"command": args.command, "error": e.to_dict()})
        code = e.exit_code
    if args.metrics:
        sys.stderr.write(get_metrics_text())
    return code


def run():
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
