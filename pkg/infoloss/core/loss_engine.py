"""
Information Loss Engine

Computes the information loss H(X|Y) of a piecewise strictly monotone function
by adaptive quadrature, both over the input (log-ratio integrand) and over the
output (entropy of the branch posterior), together with the ordered chain of
upper bounds, the bijective mass and a tightness diagnostic.

All intermediate math is in nats; results are reported in bits.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from infoloss.core.exceptions import (
    FunctionValidationError,
    InvalidParameterError,
    QuadratureConvergenceError,
    SupportMismatchError,
    UndefinedConditionalError,
)
from infoloss.core.metrics import (
    record_integrand_evaluations,
    record_quadrature_panel,
    set_last_loss,
    timed,
)
from infoloss.core.settings import settings
from infoloss.densities.base import Density, truncated_support
from infoloss.functions.base import Interval, PwmFunction, validate
from infoloss.utils.validators import ParameterValidator

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


class LossMethod(str, Enum):
    """How a loss value was obtained."""
    QUADRATURE_X = "quadrature_X"
    QUADRATURE_W = "quadrature_W"
    MONTE_CARLO = "monte_carlo"
    HISTOGRAM_ORACLE = "histogram_oracle"


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Tolerances of the adaptive quadrature.

    Attributes:
        abs_tol: Absolute target error of the loss in bits
        rel_tol: Relative target error per panel
        max_depth: Subinterval limit of the adaptive rule per panel
        mass_eps: Probability mass cut from unbounded supports
        singularity_pad: Neighbourhood at both ends of every panel, as a
            fraction of that panel's width
        workers: Threads evaluating panels concurrently
        validation_grid: Sample points per branch for function validation
    """
    abs_tol: float = field(default_factory=lambda: settings.abs_tol)
    rel_tol: float = field(default_factory=lambda: settings.rel_tol)
    max_depth: int = field(default_factory=lambda: settings.max_depth)
    mass_eps: float = field(default_factory=lambda: settings.mass_eps)
    singularity_pad: float = field(default_factory=lambda: settings.singularity_pad)
    workers: int = field(default_factory=lambda: settings.workers)
    validation_grid: int = field(default_factory=lambda: settings.validation_grid)

    def __post_init__(self):
        ParameterValidator.validate_positive(self.abs_tol, "abs_tol")
        if ParameterValidator.validate_finite(self.rel_tol, "rel_tol") < 0:
            raise InvalidParameterError("rel_tol", "Must be nonnegative")
        ParameterValidator.validate_integer_range(self.max_depth, "max_depth", min_value=10)
        mass_eps = ParameterValidator.validate_probability(self.mass_eps, "mass_eps")
        if mass_eps >= 0.5:
            raise InvalidParameterError("mass_eps", f"Must lie in (0, 0.5) (got {mass_eps})")
        pad = ParameterValidator.validate_positive(self.singularity_pad, "singularity_pad")
        if pad > 1e-6:
            raise InvalidParameterError("singularity_pad", f"Must be at most 1e-6 (got {pad})")
        ParameterValidator.validate_integer_range(self.workers, "workers", min_value=1)
        ParameterValidator.validate_integer_range(self.validation_grid, "validation_grid", min_value=16)


@dataclass
class LossReport:
    """
    Loss value with its error estimate, the bound chain and run metadata.

    Bounds and bijective mass are NaN when the method does not compute them.
    """
    loss_bits: float
    method: LossMethod
    error_estimate_bits: float
    bound1_bits: float = math.nan
    bound2_bits: float = math.nan
    bound3_bits: float = math.nan
    L: int = 1
    bijective_mass: float = math.nan
    converged: bool = True
    stderr_bits: Optional[float] = None
    rejection_fraction: float = 0.0
    n_evaluations: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def bounds(self) -> Tuple[float, float, float]:
        return self.bound1_bits, self.bound2_bits, self.bound3_bits

    def raise_for_convergence(self):
        """Raise QuadratureConvergenceError if any panel failed to converge."""
        if not self.converged:
            raise QuadratureConvergenceError(
                self,
                f"{self.method.value} estimate {self.loss_bits:.6g} bits with "
                f"inflated error {self.error_estimate_bits:.3g}",
            )

    def to_dict(self) -> Dict[str, object]:
        result = asdict(self)
        result["method"] = self.method.value
        return result


@dataclass
class TightnessReport:
    """
    Diagnostic of r(x), the ratio inside the log of the loss integrand.

    The first bound is tight when r is constant on every output region, the
    second when r is globally constant, the third when that constant is L and
    all branch images coincide.
    """
    n_points: int
    r_mean: float
    r_min: float
    r_max: float
    global_max_deviation: float
    region_max_deviation: Dict[int, float]
    region_mean: Dict[int, float]
    images_equal: bool
    L: int
    tol: float
    bound1_tight: bool
    bound2_tight: bool
    bound3_tight: bool

    def to_dict(self) -> Dict[str, object]:
        result = asdict(self)
        result["region_max_deviation"] = {str(k): v for k, v in self.region_max_deviation.items()}
        result["region_mean"] = {str(k): v for k, v in self.region_mean.items()}
        return result


@dataclass(frozen=True)
class _Region:
    """Output interval between consecutive image endpoints."""
    lo: float
    hi: float
    branches: Tuple[int, ...]
    probability: float

    @property
    def count(self) -> int:
        return len(self.branches)


@dataclass(frozen=True)
class _Panel:
    branch: int
    lo: float
    hi: float


# =============================================================================
# Shared helpers
# =============================================================================

def restrict_to_support(f: PwmFunction, d: Density) -> PwmFunction:
    if not f.covers(d.support):
        raise SupportMismatchError(f"Support {d.support} is not covered by the domain {f.domain}")
    return f.restrict(d.support)


def prepare(f: PwmFunction, d: Density, cfg: QuadratureConfig) -> Tuple[PwmFunction, Interval]:
    """Restrict f to the support of d and validate it on the truncated support."""
    g = restrict_to_support(f, d)
    window = truncated_support(d, cfg.mass_eps)
    report = validate(g, cfg.validation_grid, window=window)
    if not report.passed:
        raise FunctionValidationError(report)
    return g, window


def _root_weights(f: PwmFunction, d: Density, y: float) -> List[Tuple[int, float]]:
    """(branch, f_X(x_i) / |g'(x_i)|) for every root of y = g(x)."""
    weights = []
    for k, x in f.preimage(y):
        branch = f.branches[k]
        weights.append((k, float(d.pdf(x)) / float(branch.abs_derivative(x))))
    return weights


def extra_ratio(g: PwmFunction, d: Density, i: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    f_X(x) and r(x) - 1 for points x of branch i.

    r(x) = 1 + sum over the other roots x_k of g(x) of
    [f_X(x_k) / |g'(x_k)|] / [f_X(x) / |g'(x)|].
    """
    own = g.branches[i]
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        y = np.asarray(own.forward(x), dtype=float)
        fx = np.asarray(d.pdf(x), dtype=float)
        own_weight = fx / own.abs_derivative(x)
        others = np.zeros_like(x)
        for k, branch in enumerate(g.branches):
            if k == i:
                continue
            mask = np.asarray(branch.image.contains(y), dtype=bool)
            if np.any(mask):
                xk = branch.invert(y[mask])
                others[mask] += d.pdf(xk) / branch.abs_derivative(xk)
        extra = np.where(fx > 0, others / own_weight, 0.0)
    return fx, extra


def pointwise_loss_bits(g: PwmFunction, d: Density, x: np.ndarray) -> np.ndarray:
    """
    T(x) = log2 r(x) for arbitrary points; NaN where it cannot be evaluated.

    The expectation of T(X) is the information loss.
    """
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    idx = np.atleast_1d(g.branch_index(x))
    for i in np.unique(idx[idx >= 0]):
        mask = idx == i
        _, extra = extra_ratio(g, d, int(i), x[mask])
        with np.errstate(all="ignore"):
            out[mask] = np.log1p(extra) / LN2
    return out


def _branch_window(g: PwmFunction, window: Interval) -> List[Optional[Interval]]:
    return [b.domain.intersect(window) for b in g.branches]


def _region_table(g: PwmFunction, d: Density) -> List[_Region]:
    """
    Output regions of constant root count with their exact probabilities.

    Probabilities sum input masses between branch inverses of the region ends,
    mapping image ends onto domain ends exactly.
    """
    image = g.image
    points = [image.lo] + [e for e in g.image_endpoints if image.lo < e < image.hi] + [image.hi]
    regions = []
    for u, v in zip(points, points[1:]):
        covering = tuple(
            k for k, b in enumerate(g.branches) if b.image.lo <= u and v <= b.image.hi
        )
        masses = []
        for k in covering:
            branch = g.branches[k]
            xu, xv = branch.x_at(u), branch.x_at(v)
            masses.append(d.mass(min(xu, xv), max(xu, xv)))
        regions.append(_Region(u, v, covering, math.fsum(masses)))
    return regions


def _bounds_from_regions(regions: Sequence[_Region], L: int) -> Tuple[float, float, float]:
    bound1 = math.fsum(r.probability * math.log2(r.count) for r in regions if r.count > 1)
    image_mass = math.fsum(r.probability * r.count for r in regions)
    bound2 = math.log2(image_mass) if image_mass > 0 else 0.0
    bound3 = math.log2(L)
    return bound1, bound2, bound3


# =============================================================================
# Quadrature driver
# =============================================================================

def _integrate_panels(
    panels: Sequence[_Panel],
    make_integrand: Callable[[_Panel], Callable[[float], float]],
    cfg: QuadratureConfig,
    method: LossMethod,
) -> Tuple[float, float, bool, int]:
    """
    Integrate every panel with scipy's adaptive Gauss-Kronrod rule.

    Returns (value, error, converged, evaluations), all in nats. Slices of
    singularity_pad times the panel width at both ends are integrated on their
    own, so QUADPACK extrapolates endpoint singularities of the integrand and
    their error enters the estimate.
    """
    if not panels:
        return 0.0, 0.0, True, 0
    budget = cfg.abs_tol * LN2 / len(panels)

    def quad(integrand, a: float, b: float, epsabs: float, panel: _Panel) -> Tuple[float, float, bool, int]:
        result = integrate.quad(
            integrand, a, b,
            epsabs=epsabs, epsrel=cfg.rel_tol, limit=cfg.max_depth, full_output=1,
        )
        value, abserr, info = result[0], result[1], result[2]
        converged = True
        if len(result) > 3 and abserr > max(epsabs, cfg.rel_tol * abs(value)):
            converged = False
            logger.warning(
                f"Panel [{panel.lo:.6g}, {panel.hi:.6g}] of branch {panel.branch} "
                f"did not converge on [{a:.6g}, {b:.6g}]: {result[3].splitlines()[0]}"
            )
            abserr = max(10.0 * abserr, 1e-3 * abs(value))
        return value, abserr, converged, int(info["neval"])

    def run(panel: _Panel):
        integrand = make_integrand(panel)
        delta = cfg.singularity_pad * (panel.hi - panel.lo)
        a, b = panel.lo + delta, panel.hi - delta
        value, error, converged, evaluations = quad(integrand, a, b, 0.5 * budget, panel)
        for lo, hi in ((panel.lo, a), (b, panel.hi)):
            v, e, c, n = quad(integrand, lo, hi, 0.25 * budget, panel)
            value, error = value + v, error + e
            converged, evaluations = converged and c, evaluations + n
        logger.debug(
            f"Panel [{panel.lo:.6g}, {panel.hi:.6g}] -> {value:.12g} nats "
            f"(err {error:.2g}, {evaluations} evals)"
        )
        record_quadrature_panel(converged)
        return value, error, converged, evaluations

    if cfg.workers > 1 and len(panels) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, panels))
    else:
        results = [run(p) for p in panels]

    value = math.fsum(r[0] for r in results)
    error = math.fsum(r[1] for r in results)
    converged = all(r[2] for r in results)
    evaluations = sum(r[3] for r in results)
    record_integrand_evaluations(method.value, evaluations)
    return value, error, converged, evaluations


def _finish_report(report: LossReport, cfg: QuadratureConfig) -> LossReport:
    """Flag a report whose error estimate exceeds the requested tolerance."""
    allowed = max(cfg.abs_tol, cfg.rel_tol * abs(report.loss_bits)) + cfg.mass_eps * math.log2(max(report.L, 1))
    if report.converged and report.error_estimate_bits > allowed:
        report.converged = False
        logger.warning(
            f"{report.method.value} error {report.error_estimate_bits:.3g} bits exceeds "
            f"the tolerance {allowed:.3g}"
        )
    if not report.converged:
        report.notes.append("quadrature did not reach the requested tolerance")
    return report


def _x_panels(g: PwmFunction, window: Interval) -> List[_Panel]:
    """Input panels split at branch ends and at preimages of all image endpoints."""
    endpoints = g.image_endpoints
    panels = []
    for i, (branch, part) in enumerate(zip(g.branches, _branch_window(g, window))):
        if part is None:
            continue
        y_ends = np.asarray(branch.forward(np.array([part.lo, part.hi])), dtype=float)
        y_lo, y_hi = float(np.min(y_ends)), float(np.max(y_ends))
        cuts = {part.lo, part.hi}
        for e in endpoints:
            if y_lo < e < y_hi:
                x = float(branch.invert(e))
                if part.lo < x < part.hi:
                    cuts.add(x)
        cuts = sorted(cuts)
        panels.extend(_Panel(i, a, b) for a, b in zip(cuts, cuts[1:]) if b > a)
    return panels


def _y_panels(g: PwmFunction, window: Interval) -> List[_Panel]:
    """Output panels between image endpoints, only where two or more roots exist."""
    lows, highs = [], []
    for branch, part in zip(g.branches, _branch_window(g, window)):
        if part is None:
            continue
        y_ends = np.asarray(branch.forward(np.array([part.lo, part.hi])), dtype=float)
        lows.append(max(float(np.min(y_ends)), branch.image.lo))
        highs.append(min(float(np.max(y_ends)), branch.image.hi))
    y_lo, y_hi = min(lows), max(highs)
    points = sorted({y_lo, y_hi} | {e for e in g.image_endpoints if y_lo < e < y_hi})
    panels = []
    for u, v in zip(points, points[1:]):
        covering = [k for k, b in enumerate(g.branches) if b.image.lo <= u and v <= b.image.hi]
        if len(covering) > 1:
            panels.append(_Panel(-1, u, v))
    return panels


# =============================================================================
# Public operations
# =============================================================================

def output_density_at(f: PwmFunction, d: Density, y: float) -> float:
    """f_Y(y): sum over the roots x_i of y = g(x) of f_X(x_i) / |g'(x_i)|; 0 outside the image."""
    return math.fsum(w for _, w in _root_weights(f, d, y))


def branch_posterior(f: PwmFunction, d: Density, y: float) -> List[Tuple[int, float]]:
    """
    p(w_i|y) for every branch i; zero for branches without a root at y.

    Raises:
        UndefinedConditionalError: If f_Y(y) = 0
    """
    weights = dict(_root_weights(f, d, y))
    total = math.fsum(weights.values())
    if not total > 0 or not math.isfinite(total):
        raise UndefinedConditionalError(y)
    return [(k, weights.get(k, 0.0) / total) for k in range(f.L)]


def bounds(f: PwmFunction, d: Density, cfg: Optional[QuadratureConfig] = None) -> Tuple[float, float, float]:
    """
    The ordered upper bounds on the loss, in bits.

    bound1 sums P(Y in region) * log2(root count) over output regions,
    bound2 is log2 of the summed image probabilities, bound3 is log2 L.
    """
    g = restrict_to_support(f, d)
    return _bounds_from_regions(_region_table(g, d), g.L)


def bijective_mass(f: PwmFunction, d: Density) -> float:
    """Probability of the inputs whose output has a single root."""
    g = restrict_to_support(f, d)
    return min(1.0, math.fsum(r.probability for r in _region_table(g, d) if r.count == 1))


def attach_bounds(report: LossReport, g: PwmFunction, d: Density):
    """Fill the region bounds, bijective mass and L of a report from the prepared g."""
    regions = _region_table(g, d)
    report.bound1_bits, report.bound2_bits, report.bound3_bits = _bounds_from_regions(regions, g.L)
    report.bijective_mass = min(1.0, math.fsum(r.probability for r in regions if r.count == 1))
    report.L = g.L


@timed("info_loss")
def info_loss(f: PwmFunction, d: Density, cfg: Optional[QuadratureConfig] = None) -> LossReport:
    """
    H(X|Y) by quadrature of f_X(x) * log2 r(x) over the truncated input support.

    Raises:
        SupportMismatchError: If the support of d is not covered by f
        FunctionValidationError: If f fails validation on the support
    """
    cfg = cfg or QuadratureConfig()
    g, window = prepare(f, d, cfg)
    panels = _x_panels(g, window)

    def make_integrand(panel: _Panel):
        def integrand(x: float) -> float:
            fx, extra = extra_ratio(g, d, panel.branch, np.array([x]))
            value = float(fx[0] * np.log1p(extra[0])) if fx[0] > 0 else 0.0
            return value if math.isfinite(value) else 0.0
        return integrand

    value, error, converged, evaluations = _integrate_panels(
        panels, make_integrand, cfg, LossMethod.QUADRATURE_X
    )
    report = LossReport(
        loss_bits=value / LN2,
        method=LossMethod.QUADRATURE_X,
        error_estimate_bits=error / LN2 + cfg.mass_eps * math.log2(g.L),
        converged=converged,
        n_evaluations=evaluations,
    )
    attach_bounds(report, g, d)
    _finish_report(report, cfg)
    set_last_loss(report.method.value, report.loss_bits)
    logger.info(
        f"H(X|Y) = {report.loss_bits:.6f} bits (+-{report.error_estimate_bits:.2g}) "
        f"for '{f.name}' on {d.name}, {len(panels)} panels"
    )
    return report


@timed("info_loss_via_W")
def info_loss_via_W(f: PwmFunction, d: Density, cfg: Optional[QuadratureConfig] = None) -> LossReport:
    """
    H(W|Y) by quadrature over the output: the entropy of the branch posterior
    weighted by f_Y, integrated only where two or more roots exist.

    Raises:
        SupportMismatchError: If the support of d is not covered by f
        FunctionValidationError: If f fails validation on the support
    """
    cfg = cfg or QuadratureConfig()
    g, window = prepare(f, d, cfg)
    panels = _y_panels(g, window)

    def make_integrand(panel: _Panel):
        def integrand(y: float) -> float:
            hit, xs = g.roots(np.array([y]))
            weights = []
            for k, branch in enumerate(g.branches):
                if hit[k, 0]:
                    x = xs[k, :1]
                    weights.append(float(d.pdf(x)[0] / branch.abs_derivative(x)[0]))
            total = math.fsum(weights)
            if not total > 0:
                return 0.0
            value = math.fsum(w * math.log(total / w) for w in weights if w > 0)
            return value if math.isfinite(value) else 0.0
        return integrand

    value, error, converged, evaluations = _integrate_panels(
        panels, make_integrand, cfg, LossMethod.QUADRATURE_W
    )
    report = LossReport(
        loss_bits=value / LN2,
        method=LossMethod.QUADRATURE_W,
        error_estimate_bits=error / LN2 + cfg.mass_eps * math.log2(g.L),
        converged=converged,
        n_evaluations=evaluations,
    )
    attach_bounds(report, g, d)
    _finish_report(report, cfg)
    set_last_loss(report.method.value, report.loss_bits)
    logger.info(
        f"H(W|Y) = {report.loss_bits:.6f} bits (+-{report.error_estimate_bits:.2g}) "
        f"for '{f.name}' on {d.name}, {len(panels)} panels"
    )
    return report


def tightness_check(
    f: PwmFunction,
    d: Density,
    grid: int = 4096,
    tol: float = 1e-6,
    cfg: Optional[QuadratureConfig] = None,
) -> TightnessReport:
    """
    Sample r(x) on a midpoint grid per branch and decide which bounds are tight.

    Raises:
        InvalidParameterError: If grid < 64
    """
    ParameterValidator.validate_integer_range(grid, "grid", min_value=64)
    cfg = cfg or QuadratureConfig()
    g = restrict_to_support(f, d)
    window = truncated_support(d, cfg.mass_eps)
    endpoints = np.asarray(g.image_endpoints, dtype=float)

    r_values, region_ids = [], []
    for i, part in enumerate(_branch_window(g, window)):
        if part is None:
            continue
        xs = part.sample_points(grid)
        fx, extra = extra_ratio(g, d, i, xs)
        keep = fx > 0
        y = np.asarray(g.branches[i].forward(xs[keep]), dtype=float)
        r_values.append(1.0 + extra[keep])
        region_ids.append(np.searchsorted(endpoints, y, side="right"))

    r = np.concatenate(r_values)
    regions = np.concatenate(region_ids)
    r_mean = float(np.mean(r))
    region_dev, region_mean = {}, {}
    for region in np.unique(regions):
        values = r[regions == region]
        mean = float(np.mean(values))
        region_mean[int(region)] = mean
        region_dev[int(region)] = float(np.max(np.abs(values - mean)))

    first = g.branches[0].image
    images_equal = all(
        abs(b.image.lo - first.lo) <= tol * max(1.0, abs(first.lo))
        and abs(b.image.hi - first.hi) <= tol * max(1.0, abs(first.hi))
        for b in g.branches
    )
    global_dev = float(np.max(np.abs(r - r_mean)))
    bound1_tight = all(dev <= tol for dev in region_dev.values())
    bound2_tight = global_dev <= tol
    bound3_tight = bound2_tight and abs(r_mean - g.L) <= tol and images_equal

    report = TightnessReport(
        n_points=int(r.size),
        r_mean=r_mean,
        r_min=float(np.min(r)),
        r_max=float(np.max(r)),
        global_max_deviation=global_dev,
        region_max_deviation=region_dev,
        region_mean=region_mean,
        images_equal=images_equal,
        L=g.L,
        tol=tol,
        bound1_tight=bound1_tight,
        bound2_tight=bound2_tight,
        bound3_tight=bound3_tight,
    )
    logger.info(
        f"Tightness of '{f.name}': r in [{report.r_min:.6g}, {report.r_max:.6g}], "
        f"tight bounds {[bound1_tight, bound2_tight, bound3_tight]}"
    )
    return report
