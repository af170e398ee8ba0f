"""
Report Writer

Formats results for people (plain text on stdout) and for tools (JSON
documents and CSV tables). CSV numbers use 12 significant digits and NaN is
written as 'nan'; JSON writes NaN and infinities as null.
"""

import io
import csv
import json
import math
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np

from infoloss.core.cascade import AdditivityReport, CascadeReport
from infoloss.core.estimators import OracleReport
from infoloss.core.loss_engine import LossReport, TightnessReport
from infoloss.functions.base import Interval, PwmFunction

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("param", "loss_quadrature", "loss_mc", "mc_stderr", "bound1", "bound2", "bound3")
LOSS_COLUMNS = ("method", "loss_bits", "error_bits", "bound1", "bound2", "bound3", "L", "bijective_mass", "converged")
CASCADE_COLUMNS = ("stage", "name", "loss_bits", "error_bits")
ORACLE_COLUMNS = ("level", "bins_requested", "bins_used", "estimate_bits")
FUNCTION_TABLE_COLUMNS = ("branch", "x", "g", "derivative")


def format_number(value: Any) -> str:
    """CSV cell text: %.12g for reals, 'nan' for NaN, plain text otherwise."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return "%.12g" % value
    if value is None:
        return "nan"
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def to_json(payload: Dict[str, Any]) -> str:
    return json.dumps(_json_safe(payload), indent=2, allow_nan=False)


def write_json(path: str, payload: Dict[str, Any]):
    Path(path).write_text(to_json(payload) + "\n", encoding="utf-8")
    logger.info(f"Wrote JSON report to {path}")


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def write_csv(path: Optional[str], columns: Sequence[str], rows: Iterable[Sequence[Any]], stream: Optional[TextIO] = None):
    """Write a CSV table to path, or to stream when no path is given."""
    text = render_csv(columns, rows)
    if path is None:
        (stream or io.StringIO()).write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"Wrote CSV table to {path}")


# ==================== Rows ====================

def loss_rows(reports: Sequence[LossReport]) -> List[List[Any]]:
    return [
        [r.method.value, r.loss_bits, r.error_estimate_bits, r.bound1_bits, r.bound2_bits,
         r.bound3_bits, r.L, r.bijective_mass, r.converged]
        for r in reports
    ]


def cascade_rows(report: CascadeReport) -> List[List[Any]]:
    return [
        [i + 1, name, loss, err]
        for i, (name, loss, err) in enumerate(
            zip(report.stage_names, report.stage_losses_bits, report.stage_errors_bits)
        )
    ]


def oracle_rows(report: OracleReport) -> List[List[Any]]:
    return [[lvl.level, lvl.bins_requested, lvl.bins_used, lvl.estimate_bits] for lvl in report.levels]


def function_table_rows(f: PwmFunction, window: Interval, points_per_branch: int) -> List[List[Any]]:
    """Sample every branch on its part of window: (branch, x, g(x), g'(x))."""
    rows = []
    for i, branch in enumerate(f.branches):
        part = branch.domain.intersect(window)
        if part is None:
            continue
        xs = np.linspace(part.lo, part.hi, points_per_branch)
        if not part.hi_closed:
            xs = xs[:-1]
        if not part.lo_closed:
            xs = xs[1:]
        ys = np.asarray(branch.forward(xs), dtype=float)
        ds = np.asarray(branch.derivative(xs), dtype=float)
        rows.extend([i, float(x), float(y), float(dy)] for x, y, dy in zip(xs, ys, ds))
    return rows


# ==================== Text ====================

def _fmt(value: float, digits: int = 6) -> str:
    return "nan" if value is None or math.isnan(value) else f"{value:.{digits}f}"


def format_loss_report(report: LossReport) -> str:
    lines = [
        f"  {report.method.value:<16} H(X|Y) = {_fmt(report.loss_bits)} bits "
        f"(error {report.error_estimate_bits:.2g}{'' if report.converged else ', NOT CONVERGED'})"
    ]
    if report.stderr_bits is not None:
        lines.append(f"  {'':<16} stderr {report.stderr_bits:.3g}, rejected {report.rejection_fraction:.2e}")
    for note in report.notes:
        lines.append(f"  {'':<16} note: {note}")
    return "\n".join(lines)


def format_bounds(report: LossReport) -> str:
    b1, b2, b3 = report.bounds
    return (
        f"  bounds           {_fmt(b1)} <= {_fmt(b2)} <= {_fmt(b3)} bits "
        f"(L={report.L}, P_b={_fmt(report.bijective_mass)})"
    )


def format_tightness(report: TightnessReport) -> str:
    marks = ["tight" if t else "loose" for t in (report.bound1_tight, report.bound2_tight, report.bound3_tight)]
    return (
        f"  tightness        r in [{report.r_min:.6g}, {report.r_max:.6g}], "
        f"bound1 {marks[0]}, bound2 {marks[1]}, bound3 {marks[2]}"
    )


def format_loss_summary(
    title: str,
    reports: Sequence[LossReport],
    tightness: Optional[TightnessReport] = None,
    reference_bits: Optional[float] = None,
) -> str:
    lines = [title]
    lines.extend(format_loss_report(r) for r in reports)
    with_bounds = [r for r in reports if not math.isnan(r.bound1_bits)]
    if with_bounds:
        lines.append(format_bounds(with_bounds[0]))
    if tightness is not None:
        lines.append(format_tightness(tightness))
    if reference_bits is not None:
        lines.append(f"  closed form      {_fmt(reference_bits)} bits")
    return "\n".join(lines) + "\n"


def format_cascade(report: CascadeReport, additivity: Optional[AdditivityReport] = None) -> str:
    lines = ["Cascade"]
    for stage, name, loss, err in cascade_rows(report):
        lines.append(f"  stage {stage} {name:<20} {_fmt(loss)} bits (error {err:.2g})")
    lines.append(f"  total            {_fmt(report.total_bits)} bits")
    if additivity is not None:
        verdict = "holds" if additivity.passed else "FAILS"
        lines.append(
            f"  composite        {_fmt(additivity.direct_bits)} bits, gap {additivity.gap_bits:.3g} "
            f"(tolerance {additivity.tolerance_bits:.3g}): additivity {verdict}"
        )
    return "\n".join(lines) + "\n"


def format_oracle(report: OracleReport) -> str:
    lines = [f"Histogram oracle ({report.n_samples} samples, seed {report.seed}, L={report.L})"]
    for lvl in report.levels:
        lines.append(
            f"  level {lvl.level:<3} {lvl.bins_used:>8}/{lvl.bins_requested:<8} bins  {_fmt(lvl.estimate_bits)} bits"
        )
    return "\n".join(lines) + "\n"


def format_sweep(param: str, rows: Sequence[Sequence[Any]], failed: Sequence[Dict[str, Any]]) -> str:
    lines = [f"Sweep over {param}: {len(rows)} points, {len(failed)} failed"]
    for row in rows:
        lines.append("  " + "  ".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"
