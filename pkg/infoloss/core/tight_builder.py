"""
Tight Function Builder

Synthesizes functions g_l(x) = b_l * F_X(x) + c_l on equal-mass subdomains.
With offsets chosen so all branch images coincide, every root of an output
carries the same weight f_X / |g'| = 1 and the loss equals log2 L.
"""

import math
import logging
from typing import List, Optional, Sequence

import numpy as np

from infoloss.core.exceptions import DensityError, InvalidParameterError
from infoloss.densities.base import Density, truncated_support
from infoloss.functions.base import Branch, Interval, Orientation, PwmFunction
from infoloss.utils.validators import ParameterValidator

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9
ZERO_CHECK_GRID = 4096


def tight_offsets(L: int, signs: Sequence[int]) -> List[float]:
    """Offsets that align every branch image with (0, 1/L]."""
    return [-(l - 1) / L if b > 0 else l / L for l, b in zip(range(1, L + 1), signs)]


def _check_positive_density(d: Density, mass_eps: float):
    window = truncated_support(d, mass_eps)
    xs = window.sample_points(ZERO_CHECK_GRID)
    values = np.asarray(d.pdf(xs), dtype=float)
    if np.any(values <= 0):
        bad = xs[values <= 0][0]
        raise DensityError(f"Density vanishes at x={bad:.6g} inside its support")


def _equal_mass_cuts(d: Density, L: int, boundaries: Optional[Sequence[float]]) -> List[float]:
    support = d.support
    if boundaries is None:
        inner = [float(d.quantile(k / L)) for k in range(1, L)]
    else:
        inner = [ParameterValidator.validate_finite(b, "boundaries") for b in boundaries]
        if len(inner) != L - 1:
            raise InvalidParameterError("boundaries", f"Expected {L - 1} values (got {len(inner)})")
    cuts = [support.lo] + inner + [support.hi]
    if any(not a < b for a, b in zip(cuts, cuts[1:])):
        raise InvalidParameterError("boundaries", "Must be strictly increasing inside the support")

    if boundaries is not None:
        for k, (a, b) in enumerate(zip(cuts, cuts[1:])):
            mass = d.mass(a, b)
            if abs(mass - 1.0 / L) > MASS_TOL:
                raise InvalidParameterError(
                    "boundaries",
                    f"Subdomain {k} carries mass {mass:.12g}, expected 1/{L}",
                )
    return cuts


def build_cdf_piecewise(
    d: Density,
    L: int,
    signs: Sequence[int],
    offsets: Sequence[float],
    boundaries: Optional[Sequence[float]] = None,
    mass_eps: float = 1e-9,
) -> PwmFunction:
    """
    g_l = b_l * F_X + c_l on L equal-mass subdomains with user offsets c_l.

    Derivatives are b_l * f_X and inverses go through the quantile, both
    analytic.

    Raises:
        InvalidParameterError: If L, signs, offsets or boundaries are invalid
        DensityError: If the density vanishes inside its support
    """
    L = ParameterValidator.validate_integer_range(L, "L", min_value=1)
    signs = ParameterValidator.validate_signs(signs, L)
    if len(offsets) != L:
        raise InvalidParameterError("offsets", f"Expected {L} entries (got {len(offsets)})")
    offsets = [ParameterValidator.validate_finite(c, "offsets") for c in offsets]
    _check_positive_density(d, mass_eps)
    cuts = _equal_mass_cuts(d, L, boundaries)
    support = d.support

    def make_branch(l: int) -> Branch:
        b, c = signs[l], offsets[l]
        domain = Interval(
            cuts[l], cuts[l + 1],
            lo_closed=support.lo_closed if l == 0 else True,
            hi_closed=support.hi_closed if l == L - 1 else False,
        )
        if b > 0:
            forward = lambda x: np.asarray(d.cdf(x), dtype=float) + c
            inverse = lambda y: d.quantile(np.clip(np.asarray(y, dtype=float) - c, 0.0, 1.0))
        else:
            forward = lambda x: c - np.asarray(d.cdf(x), dtype=float)
            inverse = lambda y: d.quantile(np.clip(c - np.asarray(y, dtype=float), 0.0, 1.0))
        return Branch(
            domain=domain,
            orientation=Orientation.from_sign(b),
            forward=forward,
            derivative=lambda x: b * np.asarray(d.pdf(x), dtype=float),
            inverse=inverse,
            label=f"{'+' if b > 0 else '-'}F{c:+.6g}",
        )

    f = PwmFunction(tuple(make_branch(l) for l in range(L)), name=f"cdf_piecewise[{L}]")
    logger.debug(f"Built CDF-piecewise function with L={L}, signs={signs}, offsets={offsets}")
    return f


def build_tight(
    d: Density,
    L: int,
    signs: Optional[Sequence[int]] = None,
    boundaries: Optional[Sequence[float]] = None,
    mass_eps: float = 1e-9,
) -> PwmFunction:
    """
    A function whose loss on d is exactly log2 L and attains every bound.

    Subdomains split the support at the k/L quantiles unless boundaries are
    given; increasing branches get c_l = -(l-1)/L, decreasing ones c_l = l/L.

    Raises:
        InvalidParameterError: If boundaries do not carry mass 1/L each
        DensityError: If the density vanishes inside its support
    """
    L = ParameterValidator.validate_integer_range(L, "L", min_value=1)
    signs = [1] * L if signs is None else ParameterValidator.validate_signs(signs, L)
    f = build_cdf_piecewise(d, L, signs, tight_offsets(L, signs), boundaries, mass_eps)
    f = PwmFunction(f.branches, name=f"tight[{L}]")
    logger.info(f"Built tight function with L={L} on {d.name} (target loss {math.log2(L):.6f} bits)")
    return f
