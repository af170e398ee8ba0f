"""
Density Catalog

Factory for the built-in input densities: uniform, normal and piecewise-linear
tables (inline points or a CSV file of x,pdf pairs).
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from infoloss.core.exceptions import (
    DensityError,
    InvalidParameterError,
    MissingParameterError,
    UnknownCatalogEntryError,
)
from infoloss.densities.base import Density, NormalDensity, TableDensity, UniformDensity
from infoloss.utils.validators import ParameterValidator

logger = logging.getLogger(__name__)


def _uniform(a: Optional[float] = None, lo: Optional[float] = None,
             hi: Optional[float] = None) -> Density:
    """Uniform on [-a, a], or on [lo, hi] when both ends are given."""
    if a is not None:
        if lo is not None or hi is not None:
            raise InvalidParameterError("a", "Give either 'a' or 'lo'/'hi', not both")
        a = ParameterValidator.validate_positive(a, "a")
        return UniformDensity(-a, a)
    if lo is None and hi is None:
        raise MissingParameterError("a")
    ParameterValidator.validate_required_fields({"lo": lo, "hi": hi}, ["lo", "hi"])
    lo = ParameterValidator.validate_finite(lo, "lo")
    hi = ParameterValidator.validate_finite(hi, "hi")
    if not lo < hi:
        raise InvalidParameterError("hi", f"Must exceed lo (got lo={lo}, hi={hi})")
    return UniformDensity(lo, hi)


def _normal(sigma: float = 1.0, mu: float = 0.0) -> Density:
    sigma = ParameterValidator.validate_positive(sigma, "sigma")
    mu = ParameterValidator.validate_finite(mu, "mu")
    return NormalDensity(mu=mu, sigma=sigma)


def load_table(path: str) -> np.ndarray:
    """
    Read (x, pdf) pairs from a CSV file.

    Non-numeric rows (a header) and '#' comments are skipped.

    Raises:
        DensityError: If the file cannot be read or has no numeric pairs
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise DensityError(f"Table file not found: {path}")
    try:
        data = np.genfromtxt(file_path, delimiter=",", comments="#", dtype=float)
    except ValueError as e:
        raise DensityError(f"Cannot parse table file {path}: {e}")
    data = np.atleast_2d(data)
    if data.shape[1] < 2:
        raise DensityError(f"Table file {path} needs two columns (x, pdf)")
    data = data[:, :2]
    data = data[np.all(np.isfinite(data), axis=1)]
    logger.info(f"Loaded {data.shape[0]} table rows from {path}")
    return data


def _table(points: Optional[Sequence[Sequence[float]]] = None,
           path: Optional[str] = None) -> Density:
    if (points is None) == (path is None):
        raise InvalidParameterError("points", "Give exactly one of 'points' or 'path'")
    data = load_table(path) if path is not None else np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise DensityError("Table points must be (x, pdf) pairs")
    return TableDensity(data[:, 0], data[:, 1])


class DensityFactory:
    """
    Registry of named input densities.

    Usage:
        d = DensityFactory.create("normal", {"sigma": 2.0})
    """

    _densities: Dict[str, Callable[..., Density]] = {
        "uniform": _uniform,
        "normal": _normal,
        "table": _table,
        "custom_piecewise_pdf": _table,
    }

    _parameters: Dict[str, tuple] = {
        "uniform": ("a", "lo", "hi"),
        "normal": ("sigma", "mu"),
        "table": ("points", "path"),
        "custom_piecewise_pdf": ("points", "path"),
    }

    @classmethod
    def register_density(cls, name: str, builder: Callable[..., Density], parameters: tuple = ()):
        cls._densities[name.lower()] = builder
        cls._parameters[name.lower()] = tuple(parameters)
        logger.info(f"Registered density: {name}")

    @classmethod
    def create(cls, name: str, params: Optional[Dict[str, Any]] = None) -> Density:
        """
        Build a density by name.

        Raises:
            UnknownCatalogEntryError: If name is not registered
            InvalidParameterError: If params are invalid
            DensityError: If a table cannot be normalized
        """
        key = name.lower()
        if key not in cls._densities:
            raise UnknownCatalogEntryError(name, cls.get_available_densities())
        params = dict(params or {})
        ParameterValidator.validate_allowed_fields(params, cls._parameters[key])
        density = cls._densities[key](**params)
        logger.debug(f"Created density {density.to_dict()}")
        return density

    @classmethod
    def get_available_densities(cls) -> list[str]:
        return list(cls._densities.keys())


def builtin(name: str, params: Optional[Dict[str, Any]] = None, **kwargs) -> Density:
    """Convenience wrapper around DensityFactory.create."""
    merged = dict(params or {})
    merged.update(kwargs)
    return DensityFactory.create(name, merged)
