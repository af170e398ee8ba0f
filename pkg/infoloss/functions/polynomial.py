"""
Polynomial Functions

Splits a real polynomial into strictly monotone branches at the real roots of
its derivative.
"""

import math
import logging
from typing import List, Sequence

import numpy as np

from infoloss.core.exceptions import InvalidParameterError
from infoloss.functions.base import Branch, Interval, Orientation, PwmFunction

logger = logging.getLogger(__name__)

IMAG_TOL = 1e-9


def _critical_points(deriv: np.ndarray) -> List[float]:
    """Real roots of the derivative, polished with one Newton step."""
    if deriv.size < 2:
        return []
    roots = np.roots(deriv)
    real = roots[np.abs(roots.imag) <= IMAG_TOL * np.maximum(1.0, np.abs(roots))].real
    second = np.polyder(deriv)
    polished = []
    for x in real:
        slope = np.polyval(second, x)
        if slope != 0.0:
            step = np.polyval(deriv, x) / slope
            if abs(step) < 1e-6 * max(1.0, abs(x)):
                x = x - step
        polished.append(float(x))
    return sorted(set(polished))


def _inner_point(a: float, b: float) -> float:
    """A point strictly inside (a, b), which may be unbounded."""
    if math.isfinite(a) and math.isfinite(b):
        return 0.5 * (a + b)
    if math.isfinite(b):
        return b - max(1.0, abs(b))
    if math.isfinite(a):
        return a + max(1.0, abs(a))
    return 0.0


def from_polynomial(coeffs: Sequence[float], domain: Interval) -> PwmFunction:
    """
    Build a PwmFunction from polynomial coefficients (highest degree first).

    Branches are split where the derivative changes sign inside domain; a
    split point belongs to the branch on its right. Inverses are synthesized
    by bisection.

    Raises:
        InvalidParameterError: For constant polynomials or non-finite coefficients
    """
    c = np.trim_zeros(np.asarray(list(coeffs), dtype=float), "f")
    if c.size == 0 or not np.all(np.isfinite(c)):
        raise InvalidParameterError("coeffs", "Coefficients must be finite and not all zero")
    if c.size < 2:
        raise InvalidParameterError(
            "coeffs", "Constant polynomial is not piecewise strictly monotone"
        )

    deriv = np.polyder(c)
    inside = [x for x in _critical_points(deriv) if domain.lo < x < domain.hi]
    cuts = [domain.lo] + inside + [domain.hi]

    # Orientation per cell; neighbours with equal orientation are merged
    cells = []
    for a, b in zip(cuts, cuts[1:]):
        sign = np.sign(np.polyval(deriv, _inner_point(a, b)))
        if sign == 0:
            raise InvalidParameterError("coeffs", f"Derivative vanishes on ({a}, {b})")
        if cells and cells[-1][2] == sign:
            cells[-1][1] = b
        else:
            cells.append([a, b, sign])

    def forward(x):
        return np.polyval(c, x)

    def derivative(x):
        return np.polyval(deriv, x)

    branches = []
    for i, (a, b, sign) in enumerate(cells):
        lo_closed = domain.lo_closed if i == 0 else True
        hi_closed = domain.hi_closed if i == len(cells) - 1 else False
        branches.append(Branch(
            domain=Interval(a, b, lo_closed, hi_closed),
            orientation=Orientation.from_sign(sign),
            forward=forward,
            derivative=derivative,
            label=f"poly[{i}]",
        ))

    logger.debug(f"Polynomial of degree {c.size - 1} split into {len(branches)} branch(es)")
    return PwmFunction(tuple(branches), name="polynomial")
