"""
Function Catalog

Factory for the built-in piecewise strictly monotone functions. Every entry
ships analytic derivatives and inverses so no bisection is needed.
"""

import math
import logging
from typing import Any, Callable, Dict, Optional

import numpy as np

from infoloss.core.exceptions import InvalidParameterError, UnknownCatalogEntryError
from infoloss.functions.base import Branch, Interval, Orientation, PwmFunction
from infoloss.utils.validators import ParameterValidator

logger = logging.getLogger(__name__)

INC = Orientation.INCREASING
DEC = Orientation.DECREASING


def _magnitude(center: float = 0.0) -> PwmFunction:
    """|x - center|: two branches with |g'| = 1."""
    center = ParameterValidator.validate_finite(center, "center")
    return PwmFunction((
        Branch(
            domain=Interval(-math.inf, center, False, False),
            orientation=DEC,
            forward=lambda x: center - x,
            derivative=lambda x: -np.ones_like(np.asarray(x, dtype=float)),
            inverse=lambda y: center - y,
            label="left",
        ),
        Branch(
            domain=Interval(center, math.inf, True, False),
            orientation=INC,
            forward=lambda x: x - center,
            derivative=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            inverse=lambda y: center + y,
            label="right",
        ),
    ), name="magnitude")


def _sqlin() -> PwmFunction:
    """x^2 for x < 0, x for x >= 0."""
    return PwmFunction((
        Branch(
            domain=Interval(-math.inf, 0.0, False, False),
            orientation=DEC,
            forward=lambda x: np.square(x),
            derivative=lambda x: 2.0 * np.asarray(x, dtype=float),
            inverse=lambda y: -np.sqrt(y),
            label="square",
        ),
        Branch(
            domain=Interval(0.0, math.inf, True, False),
            orientation=INC,
            forward=lambda x: np.asarray(x, dtype=float) * 1.0,
            derivative=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            inverse=lambda y: np.asarray(y, dtype=float) * 1.0,
            label="linear",
        ),
    ), name="sqlin")


def _cubic(c: float = 100.0) -> PwmFunction:
    """
    x^3 - c*x with c > 0, split at the extrema +-sqrt(c/3).

    Inverses use the trigonometric form of the cubic formula inside the
    three-root band |y| <= 2*(c/3)^(3/2) and the hyperbolic form outside it.
    """
    c = ParameterValidator.validate_positive(c, "c")
    s = math.sqrt(c / 3.0)
    ymax = 2.0 * s ** 3

    def forward(x):
        x = np.asarray(x, dtype=float)
        return x * (x * x - c)

    def derivative(x):
        x = np.asarray(x, dtype=float)
        return 3.0 * x * x - c

    def theta(y):
        return np.arccos(np.clip(np.asarray(y, dtype=float) / ymax, -1.0, 1.0)) / 3.0

    def outer(y):
        ratio = np.maximum(np.abs(np.asarray(y, dtype=float)) / ymax, 1.0)
        return 2.0 * s * np.cosh(np.arccosh(ratio) / 3.0)

    def inverse_right(y):
        y = np.asarray(y, dtype=float)
        return np.where(y > ymax, outer(y), 2.0 * s * np.cos(theta(y)))

    def inverse_middle(y):
        return 2.0 * s * np.cos(theta(y) - 2.0 * math.pi / 3.0)

    def inverse_left(y):
        y = np.asarray(y, dtype=float)
        return np.where(y < -ymax, -outer(y), 2.0 * s * np.cos(theta(y) - 4.0 * math.pi / 3.0))

    return PwmFunction((
        Branch(Interval(-math.inf, -s, False, False), INC, forward, derivative,
               inverse_left, label="left"),
        Branch(Interval(-s, s, True, False), DEC, forward, derivative,
               inverse_middle, label="middle"),
        Branch(Interval(s, math.inf, True, False), INC, forward, derivative,
               inverse_right, label="right"),
    ), name="cubic")


def _cosine(L: int = 1) -> PwmFunction:
    """cos(x) on [0, L*pi), one branch per half period."""
    L = ParameterValidator.validate_integer_range(L, "L", min_value=1)

    def make_inverse(k: int) -> Callable:
        if k % 2 == 0:
            return lambda y: k * math.pi + np.arccos(np.clip(y, -1.0, 1.0))
        return lambda y: (k + 1) * math.pi - np.arccos(np.clip(y, -1.0, 1.0))

    branches = []
    for k in range(L):
        branches.append(Branch(
            domain=Interval(k * math.pi, (k + 1) * math.pi, True, False),
            orientation=DEC if k % 2 == 0 else INC,
            forward=np.cos,
            derivative=lambda x: -np.sin(x),
            inverse=make_inverse(k),
            label=f"half-period {k}",
        ))
    return PwmFunction(tuple(branches), name="cosine")


def _identity() -> PwmFunction:
    return _affine(1.0, 0.0, name="identity")


def _affine(scale: float = 1.0, shift: float = 0.0, name: str = "affine") -> PwmFunction:
    """scale*x + shift, a single branch."""
    scale = ParameterValidator.validate_finite(scale, "scale")
    shift = ParameterValidator.validate_finite(shift, "shift")
    if scale == 0.0:
        raise InvalidParameterError("scale", "Must be nonzero")
    return PwmFunction((
        Branch(
            domain=Interval.real_line(),
            orientation=Orientation.from_sign(scale),
            forward=lambda x: scale * np.asarray(x, dtype=float) + shift,
            derivative=lambda x: np.full_like(np.asarray(x, dtype=float), scale),
            inverse=lambda y: (np.asarray(y, dtype=float) - shift) / scale,
            label=name,
        ),
    ), name=name)


class FunctionFactory:
    """
    Registry of named catalog functions.

    Usage:
        f = FunctionFactory.create("cosine", {"L": 3})
    """

    _catalog: Dict[str, Callable[..., PwmFunction]] = {
        "magnitude": _magnitude,
        "sqlin": _sqlin,
        "cubic": _cubic,
        "cosine": _cosine,
        "identity": _identity,
        "affine": _affine,
    }

    _parameters: Dict[str, tuple] = {
        "magnitude": ("center",),
        "sqlin": (),
        "cubic": ("c",),
        "cosine": ("L",),
        "identity": (),
        "affine": ("scale", "shift"),
    }

    @classmethod
    def register_function(
        cls,
        name: str,
        builder: Callable[..., PwmFunction],
        parameters: tuple = (),
    ):
        """
        Register a new catalog entry.

        Args:
            name: Catalog identifier
            builder: Callable taking the entry's keyword parameters
            parameters: Names of the accepted keyword parameters
        """
        cls._catalog[name.lower()] = builder
        cls._parameters[name.lower()] = tuple(parameters)
        logger.info(f"Registered catalog function: {name}")

    @classmethod
    def create(cls, name: str, params: Optional[Dict[str, Any]] = None) -> PwmFunction:
        """
        Build a catalog function.

        Raises:
            UnknownCatalogEntryError: If name is not registered
            InvalidParameterError: If params are unknown or invalid for name
        """
        key = name.lower()
        if key not in cls._catalog:
            raise UnknownCatalogEntryError(name, cls.get_available_functions())
        params = dict(params or {})
        ParameterValidator.validate_allowed_fields(params, cls._parameters[key])

        f = cls._catalog[key](**params)
        logger.debug(f"Created catalog function '{key}' with L={f.L}")
        return f

    @classmethod
    def get_available_functions(cls) -> list[str]:
        return list(cls._catalog.keys())

    @classmethod
    def is_function_available(cls, name: str) -> bool:
        return name.lower() in cls._catalog


def catalog(name: str, params: Optional[Dict[str, Any]] = None, **kwargs) -> PwmFunction:
    """
    Convenience wrapper around FunctionFactory.create.

    Parameters may be passed as a dict, as keywords, or both.
    """
    merged = dict(params or {})
    merged.update(kwargs)
    return FunctionFactory.create(name, merged)
