"""
Piecewise strictly monotone functions.

This module defines the representation every computation works on: a map
g: X -> Y split into ordered, disjoint, proper subdomains on each of which g
is strictly increasing or decreasing and therefore invertible. It answers
preimage queries and validates user supplied functions by dense sampling.
"""

import math
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from infoloss.core.exceptions import (
    InvalidIntervalError,
    InvalidParameterError,
    SupportMismatchError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
RealMap = Callable[[ArrayLike], ArrayLike]

DEFAULT_XTOL = 1e-12
MAX_BISECTION_ITER = 200
DERIVATIVE_FLOOR = 1e-300
ROUND_TRIP_TOL = 1e-8
MIN_VALIDATION_GRID = 16


class Orientation(str, Enum):
    """Direction of a strictly monotone branch."""
    INCREASING = "increasing"
    DECREASING = "decreasing"

    @property
    def sign(self) -> int:
        return 1 if self is Orientation.INCREASING else -1

    @classmethod
    def from_sign(cls, sign: float) -> "Orientation":
        return cls.INCREASING if sign > 0 else cls.DECREASING


@dataclass(frozen=True)
class Interval:
    """
    Proper real interval; infinite ends are always open.

    Attributes:
        lo: Lower end (may be -inf)
        hi: Upper end (may be +inf)
        lo_closed: Whether lo belongs to the interval
        hi_closed: Whether hi belongs to the interval
    """
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise InvalidIntervalError(lo, hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if math.isinf(lo):
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(hi):
            object.__setattr__(self, "hi_closed", False)

    @classmethod
    def real_line(cls) -> "Interval":
        return cls(-math.inf, math.inf, False, False)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: ArrayLike) -> Union[bool, np.ndarray]:
        """Membership test honouring closedness; works on scalars and arrays."""
        x = np.asarray(x, dtype=float)
        above = (x > self.lo) | (self.lo_closed & (x == self.lo))
        below = (x < self.hi) | (self.hi_closed & (x == self.hi))
        result = above & below
        return bool(result) if result.ndim == 0 else result

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        """Intersection, or None when it is empty or a single point."""
        if self.lo > other.lo:
            lo, lo_closed = self.lo, self.lo_closed
        elif self.lo < other.lo:
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed and other.lo_closed

        if self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif self.hi > other.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed

        if not lo < hi:
            return None
        return Interval(lo, hi, lo_closed, hi_closed)

    def covers(self, other: "Interval", tol: float = 1e-12) -> bool:
        """True if other lies inside self up to tol; closedness is ignored."""
        slack_lo = tol * max(1.0, abs(other.lo)) if math.isfinite(other.lo) else 0.0
        slack_hi = tol * max(1.0, abs(other.hi)) if math.isfinite(other.hi) else 0.0
        return self.lo <= other.lo + slack_lo and other.hi - slack_hi <= self.hi

    def sample_points(self, n: int) -> np.ndarray:
        """
        Interior sample points.

        Bounded intervals get midpoints of n equal cells; unbounded ends are
        sampled at logarithmically spaced offsets up to 1e3.
        """
        if self.is_bounded:
            return self.lo + (np.arange(n) + 0.5) / n * self.width
        offsets = np.logspace(-3, 3, n)
        if math.isfinite(self.lo):
            return self.lo + offsets
        if math.isfinite(self.hi):
            return self.hi - offsets[::-1]
        half = n // 2
        return np.concatenate([-np.logspace(3, -3, half), np.logspace(-3, 3, n - half)])

    def to_dict(self) -> Dict[str, object]:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:.6g}, {self.hi:.6g}{right}"


def _safe_eval(fn: RealMap, x: float) -> float:
    with np.errstate(all="ignore"):
        try:
            return float(fn(np.float64(x)))
        except (OverflowError, ValueError, ZeroDivisionError):
            return math.nan


def limit_value(fn: RealMap, end: float, inward: int) -> float:
    """
    Value of fn at a domain end, taken as a limit where needed.

    Finite ends are evaluated directly (nudged inwards if that is undefined);
    infinite ends are evaluated at growing magnitudes and reported as +-inf when
    the values keep moving.
    """
    if math.isfinite(end):
        value = _safe_eval(fn, end)
        if math.isnan(value):
            value = _safe_eval(fn, end + inward * 1e-12 * max(1.0, abs(end)))
        return value

    direction = 1.0 if end > 0 else -1.0
    previous = math.nan
    for exponent in (4, 8, 16, 32, 64, 128, 256):
        value = _safe_eval(fn, direction * 10.0 ** exponent)
        if not math.isfinite(value):
            if math.isnan(value):
                if math.isnan(previous):
                    return math.nan
                return math.copysign(math.inf, previous)
            return value
        previous_value, previous = previous, value
        if exponent == 256 and not math.isnan(previous_value):
            if abs(value - previous_value) > 1e-9 * max(1.0, abs(value)):
                return math.copysign(math.inf, value - previous_value)
    return previous


def _finite_bracket(
    forward: RealMap,
    domain: Interval,
    y: np.ndarray,
    increasing: bool,
) -> Tuple[float, float]:
    """Finite [a, b] inside the domain whose images bracket every y."""
    def reaches(x: float, want_low: bool) -> bool:
        value = _safe_eval(forward, x)
        if math.isnan(value):
            return False
        if want_low:
            return value <= np.min(y)
        return value >= np.max(y)

    if math.isfinite(domain.lo):
        a = domain.lo
    else:
        anchor = domain.hi if math.isfinite(domain.hi) else 0.0
        step = 1.0
        a = anchor - step
        while not reaches(a, want_low=increasing) and step < 1e300:
            step *= 2.0
            a = anchor - step

    if math.isfinite(domain.hi):
        b = domain.hi
    else:
        anchor = domain.lo if math.isfinite(domain.lo) else 0.0
        step = 1.0
        b = anchor + step
        while not reaches(b, want_low=not increasing) and step < 1e300:
            step *= 2.0
            b = anchor + step
    return a, b


def bisect_inverse(
    forward: RealMap,
    domain: Interval,
    y: ArrayLike,
    increasing: bool,
    xtol: float = DEFAULT_XTOL,
    max_iter: int = MAX_BISECTION_ITER,
) -> ArrayLike:
    """
    Invert a strictly monotone map numerically.

    Scalars go through Brent's bracketing solver; arrays are bisected in a
    vectorised loop. Both stop at |dx| <= xtol * max(1, |x|) or max_iter.
    """
    scalar = np.ndim(y) == 0
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    a, b = _finite_bracket(forward, domain, y_arr, increasing)

    if scalar:
        target = float(y_arr[0])
        fa = _safe_eval(forward, a) - target
        fb = _safe_eval(forward, b) - target
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0:
            return optimize.brentq(
                lambda x: float(forward(x)) - target, a, b,
                xtol=xtol, rtol=max(xtol, 4 * np.finfo(float).eps), maxiter=max_iter,
                disp=False,
            )

    lo = np.full_like(y_arr, a)
    hi = np.full_like(y_arr, b)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        with np.errstate(all="ignore"):
            f_mid = np.asarray(forward(mid), dtype=float)
        go_right = f_mid < y_arr if increasing else f_mid > y_arr
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
        if np.all(hi - lo <= xtol * np.maximum(1.0, np.abs(mid))):
            break
    x = 0.5 * (lo + hi)
    return float(x[0]) if scalar else x


@dataclass(frozen=True)
class Branch:
    """
    One strictly monotone piece g_l: X_l -> Y_l.

    Attributes:
        domain: Subdomain X_l
        orientation: Increasing or decreasing
        forward: g_l, vectorised over numpy arrays
        derivative: g_l', vectorised
        inverse: Optional analytic g_l^{-1}; bisection is used when absent
        image: Y_l, computed from the end point limits unless given
        label: Free-form description used in reports
    """
    domain: Interval
    orientation: Orientation
    forward: RealMap
    derivative: RealMap
    inverse: Optional[RealMap] = None
    image: Optional[Interval] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if self.image is None:
            object.__setattr__(self, "image", self._compute_image())

    def _compute_image(self) -> Interval:
        at_lo = limit_value(self.forward, self.domain.lo, inward=1)
        at_hi = limit_value(self.forward, self.domain.hi, inward=-1)
        if math.isnan(at_lo) or math.isnan(at_hi):
            raise InvalidParameterError(
                "forward", f"Undefined at the ends of {self.domain}"
            )
        if at_lo <= at_hi:
            return Interval(at_lo, at_hi, self.domain.lo_closed, self.domain.hi_closed)
        return Interval(at_hi, at_lo, self.domain.hi_closed, self.domain.lo_closed)

    @property
    def increasing(self) -> bool:
        return self.orientation is Orientation.INCREASING

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self.forward(x)

    def abs_derivative(self, x: ArrayLike) -> ArrayLike:
        """|g_l'(x)| floored away from zero."""
        with np.errstate(all="ignore"):
            return np.maximum(np.abs(self.derivative(x)), DERIVATIVE_FLOOR)

    def invert(self, y: ArrayLike, xtol: Optional[float] = None) -> ArrayLike:
        """g_l^{-1}(y) for y in the image (clipped onto it)."""
        y_clipped = np.clip(y, self.image.lo, self.image.hi)
        if self.inverse is not None and xtol is None:
            with np.errstate(all="ignore"):
                x = self.inverse(y_clipped)
            return float(x) if np.ndim(x) == 0 else np.asarray(x, dtype=float)
        return bisect_inverse(
            self.forward, self.domain, y_clipped, self.increasing,
            xtol=xtol if xtol is not None else DEFAULT_XTOL,
        )

    def x_at(self, y: float) -> float:
        """
        Inverse that maps the image ends exactly onto the domain ends.

        Used to turn output intervals into input intervals without evaluating
        the inverse at infinite or rounded ends.
        """
        if y <= self.image.lo:
            return self.domain.lo if self.increasing else self.domain.hi
        if y >= self.image.hi:
            return self.domain.hi if self.increasing else self.domain.lo
        return float(self.invert(y))

    def restrict(self, interval: Interval) -> Optional["Branch"]:
        """The same branch on domain ∩ interval, or None if that is empty."""
        domain = self.domain.intersect(interval)
        if domain is None:
            return None
        if domain == self.domain:
            return self
        return replace(self, domain=domain, image=None)


@dataclass(frozen=True)
class PreimageSet:
    """Roots of y = g(x): at most one (branch_index, x) pair per branch."""
    roots: Tuple[Tuple[int, float], ...] = ()

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    @property
    def indices(self) -> List[int]:
        return [index for index, _ in self.roots]

    @property
    def xs(self) -> List[float]:
        return [x for _, x in self.roots]


@dataclass
class ValidationReport:
    """Outcome of validate(): one boolean per invariant plus diagnostics."""
    checks: Dict[str, bool] = field(default_factory=dict)
    max_inverse_residual: float = 0.0
    branch_count: int = 0
    messages: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failed_checks(self) -> List[str]:
        return [name for name, ok in self.checks.items() if not ok]

    def fail(self, check: str, message: str):
        self.checks[check] = False
        self.messages.append(message)

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "checks": dict(self.checks),
            "max_inverse_residual": self.max_inverse_residual,
            "branch_count": self.branch_count,
            "messages": list(self.messages),
        }


@dataclass(frozen=True)
class PwmFunction:
    """
    Piecewise strictly monotone function given by ordered branches.

    Immutable; every method is read-only and safe to call from several threads.
    """
    branches: Tuple[Branch, ...]
    name: str = "custom"

    def __post_init__(self):
        branches = tuple(self.branches)
        if not branches:
            raise InvalidParameterError("branches", "At least one branch is required")
        object.__setattr__(self, "branches", branches)

    @property
    def L(self) -> int:
        return len(self.branches)

    @property
    def domain(self) -> Interval:
        """Hull of the branch domains."""
        first, last = self.branches[0].domain, self.branches[-1].domain
        return Interval(first.lo, last.hi, first.lo_closed, last.hi_closed)

    @property
    def image(self) -> Interval:
        """Hull of the branch images."""
        lo = min(self.branches, key=lambda b: b.image.lo).image
        hi = max(self.branches, key=lambda b: b.image.hi).image
        return Interval(lo.lo, hi.hi, lo.lo_closed, hi.hi_closed)

    @property
    def breakpoints(self) -> List[float]:
        """Finite branch domain ends, sorted and unique."""
        points = set()
        for branch in self.branches:
            for end in (branch.domain.lo, branch.domain.hi):
                if math.isfinite(end):
                    points.add(end)
        return sorted(points)

    @property
    def image_endpoints(self) -> List[float]:
        """Finite branch image ends, sorted and unique."""
        points = set()
        for branch in self.branches:
            for end in (branch.image.lo, branch.image.hi):
                if math.isfinite(end):
                    points.add(end)
        return sorted(points)

    def branch_index(self, x: ArrayLike) -> ArrayLike:
        """Index of the branch containing x, -1 outside the domain."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        los = np.array([b.domain.lo for b in self.branches])
        idx = np.clip(np.searchsorted(los, x_arr, side="right") - 1, 0, self.L - 1)
        result = np.full(x_arr.shape, -1, dtype=int)
        for candidate in (idx, np.maximum(idx - 1, 0)):
            pending = result < 0
            if not np.any(pending):
                break
            for i in np.unique(candidate[pending]):
                mask = pending & (candidate == i)
                inside = np.asarray(self.branches[i].domain.contains(x_arr[mask]))
                hits = np.flatnonzero(mask)[inside]
                result[hits] = i
        return int(result[0]) if np.ndim(x) == 0 else result

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self._dispatch(x, lambda branch, pts: branch.forward(pts))

    def derivative(self, x: ArrayLike) -> ArrayLike:
        return self._dispatch(x, lambda branch, pts: branch.derivative(pts))

    def _dispatch(self, x: ArrayLike, fn) -> ArrayLike:
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.atleast_1d(self.branch_index(x_arr))
        out = np.full(x_arr.shape, np.nan)
        for i in np.unique(idx[idx >= 0]):
            mask = idx == i
            with np.errstate(all="ignore"):
                out[mask] = fn(self.branches[i], x_arr[mask])
        return float(out[0]) if np.ndim(x) == 0 else out

    def restrict(self, interval: Interval) -> "PwmFunction":
        """Restriction to interval; branches that miss it are dropped."""
        kept = [b.restrict(interval) for b in self.branches]
        kept = [b for b in kept if b is not None]
        if not kept:
            raise SupportMismatchError(f"{interval} does not meet the domain {self.domain}")
        if len(kept) == self.L and all(k is b for k, b in zip(kept, self.branches)):
            return self
        return PwmFunction(tuple(kept), name=self.name)

    def covers(self, interval: Interval, tol: float = 1e-12) -> bool:
        """True if the branch domains cover interval without gaps."""
        if not self.domain.covers(interval, tol):
            return False
        for left, right in zip(self.branches, self.branches[1:]):
            gap_lo, gap_hi = left.domain.hi, right.domain.lo
            if gap_hi - gap_lo > tol * max(1.0, abs(gap_lo)):
                if gap_hi > interval.lo and gap_lo < interval.hi:
                    return False
        return True

    def roots(self, y: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """
        Vectorised preimage.

        Returns (hit, x), both shaped (L, n): hit[k, j] tells whether y_j lies
        in the image of branch k, x[k, j] is the root there (NaN otherwise).
        """
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        hit = np.zeros((self.L, y_arr.size), dtype=bool)
        xs = np.full((self.L, y_arr.size), np.nan)
        for k, branch in enumerate(self.branches):
            mask = np.asarray(branch.image.contains(y_arr), dtype=bool)
            if np.any(mask):
                hit[k] = mask
                xs[k, mask] = branch.invert(y_arr[mask])
        return hit, xs

    def preimage(self, y: float, tol: float = DEFAULT_XTOL) -> PreimageSet:
        return preimage(self, y, tol)

    def describe(self) -> List[Dict[str, object]]:
        """Branch table for reports."""
        return [
            {
                "index": i,
                "label": b.label,
                "orientation": b.orientation.value,
                "domain": b.domain.to_dict(),
                "image": b.image.to_dict(),
            }
            for i, b in enumerate(self.branches)
        ]


def validate(
    f: PwmFunction,
    grid_points_per_branch: int = 1024,
    window: Optional[Interval] = None,
) -> ValidationReport:
    """
    Check the piecewise strict monotonicity invariants by dense sampling.

    Failures are reported, not raised. When window is given, branches are
    sampled on their intersection with it (the loss engine passes the
    mass-truncated support of the input density).

    Raises:
        InvalidParameterError: If grid_points_per_branch < 16
    """
    if grid_points_per_branch < MIN_VALIDATION_GRID:
        raise InvalidParameterError(
            "grid_points_per_branch",
            f"Must be at least {MIN_VALIDATION_GRID} (got {grid_points_per_branch})",
        )

    report = ValidationReport(branch_count=f.L)
    for check in ("branch_count", "ordered_disjoint", "monotonicity",
                  "derivative_sign", "inverse_round_trip"):
        report.checks[check] = True

    if f.L < 1:
        report.fail("branch_count", "Function has no branches")

    for i, (left, right) in enumerate(zip(f.branches, f.branches[1:])):
        a, b = left.domain, right.domain
        if a.hi > b.lo or (a.hi == b.lo and a.hi_closed and b.lo_closed):
            report.fail(
                "ordered_disjoint",
                f"Branches {i} {a} and {i + 1} {b} overlap or are out of order",
            )

    for i, branch in enumerate(f.branches):
        region = branch.domain if window is None else branch.domain.intersect(window)
        if region is None:
            continue
        xs = region.sample_points(grid_points_per_branch)
        xs = xs[np.asarray(branch.domain.contains(xs), dtype=bool)]
        if xs.size < 2:
            continue

        with np.errstate(all="ignore"):
            ys = np.asarray(branch.forward(xs), dtype=float)
            slopes = np.asarray(branch.derivative(xs), dtype=float)

        steps = np.diff(ys) * branch.orientation.sign
        if not np.all(np.isfinite(ys)) or np.any(steps <= 0):
            report.fail(
                "monotonicity",
                f"Branch {i} is not strictly {branch.orientation.value} on {region}",
            )

        if np.any(np.sign(slopes) != branch.orientation.sign):
            bad = xs[np.sign(slopes) != branch.orientation.sign]
            report.fail(
                "derivative_sign",
                f"Branch {i} derivative has the wrong sign or vanishes at x={bad[0]:.6g}",
            )

        finite = np.isfinite(ys)
        if np.any(finite):
            y_ok = ys[finite]
            x_back = np.asarray(branch.invert(y_ok), dtype=float)
            with np.errstate(all="ignore"):
                y_back = np.asarray(branch.forward(x_back), dtype=float)
            residual = np.abs(y_back - y_ok) / np.maximum(1.0, np.abs(y_ok))
            worst = float(np.nanmax(residual)) if residual.size else 0.0
            if not np.all(np.isfinite(residual)):
                worst = math.inf
            report.max_inverse_residual = max(report.max_inverse_residual, worst)
            if worst > ROUND_TRIP_TOL:
                report.fail(
                    "inverse_round_trip",
                    f"Branch {i} inverse residual {worst:.3g} exceeds {ROUND_TRIP_TOL}",
                )

    if report.passed:
        logger.debug(f"Function '{f.name}' passed validation (L={f.L})")
    else:
        logger.warning(f"Function '{f.name}' failed validation: {report.failed_checks}")
    return report


def preimage(f: PwmFunction, y: float, tol: float = DEFAULT_XTOL) -> PreimageSet:
    """
    All roots of y = g(x), one per branch whose image contains y.

    Analytic inverses are used when present; branches without one are
    bisected to tolerance tol on x. y outside the image gives an empty set.

    Raises:
        InvalidParameterError: If tol <= 0
    """
    if not tol > 0:
        raise InvalidParameterError("tol", f"Must be positive (got {tol})")
    roots = []
    for k, branch in enumerate(f.branches):
        if branch.image.contains(y):
            if branch.inverse is not None:
                x = float(branch.invert(y))
            else:
                x = float(branch.invert(y, xtol=tol))
            roots.append((k, x))
    return PreimageSet(tuple(roots))
