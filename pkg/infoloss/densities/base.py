"""
Input and output densities.

This module defines the abstract Density interface every input distribution
implements (pdf, cdf, quantile, sampler, support), the concrete uniform,
normal and piecewise-linear table densities, and the push-forward density of
a piecewise monotone function applied to a density.
"""

import math
import logging
import threading
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy import special

from infoloss.core.exceptions import DensityError, InvalidParameterError, SupportMismatchError
from infoloss.functions.base import ArrayLike, Interval, PwmFunction
from infoloss.utils.validators import ParameterValidator

logger = logging.getLogger(__name__)

QUANTILE_GRID = 4096
QUANTILE_ITER = 200


class Density(ABC):
    """
    Abstract base class for univariate densities.

    Every method is vectorised over numpy arrays and read-only; instances are
    safe to share between threads. Sampling takes an explicit generator.
    """

    name: str = "density"

    @property
    @abstractmethod
    def support(self) -> Interval:
        """Closure of the set where pdf > 0."""

    @abstractmethod
    def pdf(self, x: ArrayLike) -> ArrayLike:
        """Probability density f_X(x); zero outside the support."""

    @abstractmethod
    def cdf(self, x: ArrayLike) -> ArrayLike:
        """Cumulative distribution F_X(x)."""

    @abstractmethod
    def quantile(self, p: ArrayLike) -> ArrayLike:
        """Inverse CDF for p in (0, 1)."""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw size samples by inverse transform."""
        return np.asarray(self.quantile(rng.random(size)), dtype=float)

    def mass(self, lo: float, hi: float) -> float:
        """P(lo < X <= hi), clamped at zero."""
        return max(0.0, float(self.cdf(hi)) - float(self.cdf(lo)))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.name, "support": self.support.to_dict()}


class UniformDensity(Density):
    """Uniform density on [lo, hi]."""

    name = "uniform"

    def __init__(self, lo: float, hi: float):
        self._support = Interval(lo, hi)
        if not self._support.is_bounded:
            raise DensityError("Uniform density needs a bounded support")
        self.lo, self.hi = self._support.lo, self._support.hi
        self.height = 1.0 / (self.hi - self.lo)

    @property
    def support(self) -> Interval:
        return self._support

    def pdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        out = np.where((x >= self.lo) & (x <= self.hi), self.height, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x: ArrayLike) -> ArrayLike:
        out = np.clip((np.asarray(x, dtype=float) - self.lo) * self.height, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, p: ArrayLike) -> ArrayLike:
        out = self.lo + np.asarray(p, dtype=float) * (self.hi - self.lo)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.name, "lo": self.lo, "hi": self.hi}


class NormalDensity(Density):
    """Gaussian density N(mu, sigma^2); CDF and quantile via scipy.special."""

    name = "normal"

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        self.mu = ParameterValidator.validate_finite(mu, "mu")
        self.sigma = ParameterValidator.validate_positive(sigma, "sigma")
        self._norm = 1.0 / (self.sigma * math.sqrt(2.0 * math.pi))

    @property
    def support(self) -> Interval:
        return Interval.real_line()

    def _z(self, x: ArrayLike) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mu) / self.sigma

    def pdf(self, x: ArrayLike) -> ArrayLike:
        z = self._z(x)
        out = self._norm * np.exp(-0.5 * z * z)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x: ArrayLike) -> ArrayLike:
        out = special.ndtr(self._z(x))
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, p: ArrayLike) -> ArrayLike:
        out = self.mu + self.sigma * special.ndtri(np.asarray(p, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.mu + self.sigma * rng.standard_normal(size)

    def mass(self, lo: float, hi: float) -> float:
        # Upper tail through the survival function keeps small masses accurate
        if lo > self.mu:
            upper = special.ndtr(-self._z(lo)) - special.ndtr(-self._z(hi))
            return max(0.0, float(upper))
        return super().mass(lo, hi)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.name, "mu": self.mu, "sigma": self.sigma}


class TableDensity(Density):
    """
    Piecewise-linear density through (x, pdf) nodes, renormalized to unit mass.

    CDF and quantile are exact: the CDF is piecewise quadratic and its inverse
    is solved in closed form on each segment.
    """

    name = "table"

    def __init__(self, xs: Sequence[float], values: Sequence[float]):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or xs.shape != values.shape:
            raise DensityError("Table needs at least two (x, pdf) pairs of equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(values))):
            raise DensityError("Table entries must be finite")
        if np.any(np.diff(xs) <= 0):
            raise DensityError("Table x values must be strictly increasing")
        if np.any(values < 0):
            raise DensityError("Table pdf values must be nonnegative")

        widths = np.diff(xs)
        areas = 0.5 * (values[:-1] + values[1:]) * widths
        total = float(np.sum(areas))
        if total <= 0:
            raise DensityError("Table pdf has zero total mass")

        self.xs = xs
        self.values = values / total
        self.widths = widths
        self.cumulative = np.concatenate([[0.0], np.cumsum(areas / total)])
        self.cumulative[-1] = 1.0
        self._support = Interval(xs[0], xs[-1])
        logger.debug(f"Table density with {xs.size} nodes renormalized by {total:.6g}")

    @property
    def support(self) -> Interval:
        return self._support

    def pdf(self, x: ArrayLike) -> ArrayLike:
        return np.interp(x, self.xs, self.values, left=0.0, right=0.0)

    def _segment(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.xs.size - 2)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        x_arr = np.asarray(x, dtype=float)
        i = self._segment(x_arr)
        t = np.clip(x_arr - self.xs[i], 0.0, self.widths[i])
        p0, p1 = self.values[i], self.values[i + 1]
        out = self.cumulative[i] + p0 * t + (p1 - p0) * t * t / (2.0 * self.widths[i])
        out = np.clip(np.where(x_arr >= self.xs[-1], 1.0, out), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, p: ArrayLike) -> ArrayLike:
        p_arr = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.cumulative, p_arr, side="right") - 1, 0, self.xs.size - 2)
        delta = p_arr - self.cumulative[i]
        p0, p1, h = self.values[i], self.values[i + 1], self.widths[i]
        a = (p1 - p0) / (2.0 * h)
        root = np.sqrt(np.maximum(p0 * p0 + 4.0 * a * delta, 0.0))
        denom = p0 + root
        with np.errstate(all="ignore"):
            t = np.where(denom > 0, 2.0 * delta / denom, 0.0)
        out = self.xs[i] + np.clip(t, 0.0, h)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.name, "points": [[float(a), float(b)] for a, b in zip(self.xs, self.values)]}


class PushforwardDensity(Density):
    """
    Density of Y = g(X): f_Y(y) = sum over roots x_i of f_X(x_i) / |g'(x_i)|.

    The CDF is exact, summing input masses between branch inverses. Quantiles
    are bracketed on a cached grid and refined by bisection, so the object can
    feed the next stage of a cascade.
    """

    name = "pushforward"

    def __init__(self, source: Density, func: PwmFunction, mass_eps: float = 1e-9):
        self.source = source
        self.func = func
        self.mass_eps = mass_eps
        self._support = func.image
        self._grid: Optional[np.ndarray] = None
        self._grid_cdf: Optional[np.ndarray] = None
        self._lock = threading.Lock()

    @property
    def support(self) -> Interval:
        return self._support

    def pdf(self, y: ArrayLike) -> ArrayLike:
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        hit, xs = self.func.roots(y_arr)
        total = np.zeros(y_arr.shape)
        for k, branch in enumerate(self.func.branches):
            mask = hit[k]
            if np.any(mask):
                total[mask] += self.source.pdf(xs[k, mask]) / branch.abs_derivative(xs[k, mask])
        return float(total[0]) if np.ndim(y) == 0 else total

    def cdf(self, y: ArrayLike) -> ArrayLike:
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        total = np.zeros(y_arr.shape)
        for branch in self.func.branches:
            dom, img = branch.domain, branch.image
            f_lo = float(self.source.cdf(dom.lo)) if math.isfinite(dom.lo) else 0.0
            f_hi = float(self.source.cdf(dom.hi)) if math.isfinite(dom.hi) else 1.0
            inside = (y_arr > img.lo) & (y_arr < img.hi)
            above = y_arr >= img.hi
            total[above] += f_hi - f_lo
            if np.any(inside):
                f_x = self.source.cdf(branch.invert(y_arr[inside]))
                total[inside] += (f_x - f_lo) if branch.increasing else (f_hi - f_x)
        total = np.clip(total, 0.0, 1.0)
        return float(total[0]) if np.ndim(y) == 0 else total

    def _truncated_range(self) -> Interval:
        window = truncated_support(self.source, self.mass_eps)
        lo, hi = math.inf, -math.inf
        for branch in self.func.branches:
            part = branch.domain.intersect(window)
            if part is None:
                continue
            ends = branch.forward(np.array([part.lo, part.hi], dtype=float))
            lo, hi = min(lo, float(np.min(ends))), max(hi, float(np.max(ends)))
        return Interval(max(lo, self._support.lo), min(hi, self._support.hi))

    def _quantile_grid(self):
        with self._lock:
            if self._grid is None:
                window = self._truncated_range()
                grid = np.linspace(window.lo, window.hi, QUANTILE_GRID)
                edges = [e for e in self.func.image_endpoints if window.lo < e < window.hi]
                grid = np.unique(np.concatenate([grid, edges]))
                self._grid_cdf = np.maximum.accumulate(np.asarray(self.cdf(grid), dtype=float))
                self._grid = grid
                logger.debug(f"Cached pushforward CDF on {grid.size} points over {window}")
        return self._grid, self._grid_cdf

    def _outer_bracket(self, p: float, lower: bool, start: float) -> float:
        end = self._support.lo if lower else self._support.hi
        if math.isfinite(end):
            return end
        step = max(1.0, abs(start))
        x = start - step if lower else start + step
        while step < 1e300:
            value = float(self.cdf(x))
            if (lower and value <= p) or (not lower and value >= p):
                return x
            step *= 2.0
            x = start - step if lower else start + step
        return x

    def quantile(self, p: ArrayLike) -> ArrayLike:
        grid, grid_cdf = self._quantile_grid()
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        idx = np.searchsorted(grid_cdf, p_arr, side="left")
        lo = grid[np.clip(idx - 1, 0, grid.size - 1)].astype(float)
        hi = grid[np.clip(idx, 0, grid.size - 1)].astype(float)
        for j in np.flatnonzero(idx == 0):
            lo[j] = self._outer_bracket(p_arr[j], True, grid[0])
        for j in np.flatnonzero(idx >= grid.size):
            hi[j] = self._outer_bracket(p_arr[j], False, grid[-1])

        for _ in range(QUANTILE_ITER):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.cdf(mid), dtype=float) < p_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(mid))):
                break
        out = 0.5 * (lo + hi)
        return float(out[0]) if np.ndim(p) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.func(self.source.sample(rng, size)), dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.name,
            "function": self.func.name,
            "source": self.source.to_dict(),
            "support": self._support.to_dict(),
        }


def truncated_support(d: Density, mass_eps: float) -> Interval:
    """
    Support of d with infinite ends cut at the eps/2 and 1 - eps/2 quantiles.

    Finite ends are kept, so compactly supported densities come back unchanged.

    Raises:
        InvalidParameterError: If mass_eps is not in (0, 0.5)
    """
    if ParameterValidator.validate_probability(mass_eps, "mass_eps") >= 0.5:
        raise InvalidParameterError("mass_eps", f"Must lie in (0, 0.5) (got {mass_eps})")
    support = d.support
    lo = support.lo if math.isfinite(support.lo) else float(d.quantile(mass_eps / 2.0))
    hi = support.hi if math.isfinite(support.hi) else float(d.quantile(1.0 - mass_eps / 2.0))
    return Interval(lo, hi, support.lo_closed or math.isinf(support.lo),
                    support.hi_closed or math.isinf(support.hi))


def pushforward(f: PwmFunction, d: Density, mass_eps: float = 1e-9) -> PushforwardDensity:
    """
    Output density of f applied to X ~ d.

    Raises:
        SupportMismatchError: If the support of d is not inside the domain of f
    """
    if not f.covers(d.support):
        raise SupportMismatchError(f"Support {d.support} is not covered by the domain {f.domain}")
    return PushforwardDensity(d, f.restrict(d.support), mass_eps=mass_eps)
