"""
Closed-form reference values.

Independent formulas for the worked examples, used to cross-check the
numerical engine in tests and reported by the CLI when an experiment matches
one of them.
"""

import math
from typing import Any, Dict, Optional, Tuple

from scipy import special

from infoloss.core.exceptions import InvalidParameterError


def gaussian_q(x: float) -> float:
    """Gaussian tail Q(x) = P(Z > x) = erfc(x / sqrt 2) / 2."""
    return 0.5 * float(special.erfc(x / math.sqrt(2.0)))


def sqlin_loss_bits(a: float) -> float:
    """Loss of x^2 (x < 0) / x (x >= 0) on a uniform input over [-a, a], a >= 1."""
    if not a >= 1.0:
        raise InvalidParameterError("a", f"Closed form needs a >= 1 (got {a})")
    r = math.sqrt(a)
    return (
        (4.0 * a + 4.0 * r + 1.0) / (8.0 * a) * math.log2(2.0 * r + 1.0)
        - math.log2(2.0 * r) / 2.0
        - 1.0 / (4.0 * r * math.log(2.0))
    )


def sqlin_bounds_bits(a: float) -> Tuple[float, float, float]:
    """The three upper bounds for the same setting."""
    if not a >= 1.0:
        raise InvalidParameterError("a", f"Closed form needs a >= 1 (got {a})")
    r = math.sqrt(a)
    return (1.0 + r) / (2.0 * r), math.log2((3.0 * r + 1.0) / (2.0 * r)), 1.0


def cubic_critical_points(c: float = 100.0) -> Tuple[float, float]:
    s = math.sqrt(c / 3.0)
    return -s, s


def cubic_bijective_mass(sigma: float, c: float = 100.0) -> float:
    """
    P_b for x^3 - c*x on N(0, sigma^2).

    Outputs have one root only for |x| > 2*sqrt(c/3), so P_b = 2*Q(2*sqrt(c/3)/sigma).
    """
    return 2.0 * gaussian_q(2.0 * math.sqrt(c / 3.0) / sigma)


def cubic_bound1_bits(sigma: float, c: float = 100.0) -> float:
    return (1.0 - cubic_bijective_mass(sigma, c)) * math.log2(3.0)


def tight_loss_bits(L: int) -> float:
    return math.log2(L)


def closed_form_loss(function: Dict[str, Any], density: Dict[str, Any]) -> Optional[float]:
    """
    Reference loss for a (function, density) config pair, or None if unknown.

    Recognizes the magnitude map on an even density, the square/linear map on
    a symmetric uniform input with a >= 1, identity and affine maps, and the
    cosine map on a uniform input over [0, L*pi).
    """
    if function.get("kind") != "catalog":
        return None
    name = function.get("name")
    params = function.get("params") or {}
    kind = density.get("kind")

    if name in ("identity", "affine"):
        return 0.0
    if name == "magnitude":
        center = params.get("center", 0.0)
        if kind == "normal" and density.get("mu", 0.0) == center:
            return 1.0
        if kind == "uniform" and _uniform_ends(density) is not None:
            lo, hi = _uniform_ends(density)
            if math.isclose(lo + hi, 2.0 * center, abs_tol=1e-12):
                return 1.0
    if name == "sqlin" and kind == "uniform" and density.get("a") is not None:
        if density["a"] >= 1.0:
            return sqlin_loss_bits(density["a"])
    if name == "cosine" and kind == "uniform":
        ends = _uniform_ends(density)
        L = params.get("L", 1)
        if ends is not None and ends[0] == 0.0 and math.isclose(ends[1], L * math.pi, rel_tol=1e-12):
            return math.log2(L)
    return None


def _uniform_ends(density: Dict[str, Any]) -> Optional[Tuple[float, float]]:
    if density.get("a") is not None:
        return -float(density["a"]), float(density["a"])
    if density.get("lo") is not None and density.get("hi") is not None:
        return float(density["lo"]), float(density["hi"])
    return None
