"""
Experiment Config Parser

Pydantic schema of the JSON experiment documents read by the CLI, plus the
builders that turn validated sections into functions, densities and run
configurations.

Example:
    {
      "function": {"kind": "catalog", "name": "cubic", "params": {"c": 100}},
      "density": {"kind": "normal", "sigma": 10},
      "mc": {"n_samples": 1000000, "seed": 7},
      "sweep": {"param": "density.sigma", "start": 1, "stop": 100, "num": 25, "spacing": "log"}
    }
"""

import copy
import json
import math
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from infoloss.core.estimators import HistogramConfig, McConfig
from infoloss.core.exceptions import ConfigurationError, InvalidParameterError
from infoloss.core.loss_engine import QuadratureConfig
from infoloss.core.settings import settings
from infoloss.densities.base import Density
from infoloss.densities.factory import DensityFactory
from infoloss.functions.base import Interval, PwmFunction
from infoloss.functions.factory import FunctionFactory
from infoloss.functions.polynomial import from_polynomial

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ==================== Function Models ====================

class IntervalSpec(_Section):
    """Interval with optional ends; a missing end is infinite."""
    lo: Optional[float] = Field(None, description="Lower end, omitted for -inf")
    hi: Optional[float] = Field(None, description="Upper end, omitted for +inf")
    lo_closed: bool = True
    hi_closed: bool = True

    def to_interval(self) -> Interval:
        lo = -math.inf if self.lo is None else self.lo
        hi = math.inf if self.hi is None else self.hi
        return Interval(lo, hi, self.lo_closed, self.hi_closed)


class PieceSpec(_Section):
    """One polynomial piece, strictly monotone on its interval."""
    coeffs: List[float] = Field(..., min_length=2, description="Highest degree first")
    domain: IntervalSpec


class FunctionSpec(_Section):
    """Function section: a catalog entry, a polynomial, or polynomial pieces."""
    kind: Literal["catalog", "polynomial", "piecewise"] = "catalog"
    name: Optional[str] = Field(None, description="Catalog entry name")
    params: Dict[str, Any] = Field(default_factory=dict, description="Catalog parameters")
    coeffs: Optional[List[float]] = Field(None, description="Polynomial coefficients, highest degree first")
    domain: Optional[IntervalSpec] = None
    pieces: Optional[List[PieceSpec]] = None

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not FunctionFactory.is_function_available(v):
            available = ", ".join(FunctionFactory.get_available_functions())
            raise ValueError(f"Unknown catalog function '{v}' (available: {available})")
        return v

    @model_validator(mode="after")
    def check_kind_fields(self) -> "FunctionSpec":
        if self.kind == "catalog" and self.name is None:
            raise ValueError("Catalog functions need 'name'")
        if self.kind == "polynomial" and not self.coeffs:
            raise ValueError("Polynomial functions need 'coeffs'")
        if self.kind == "piecewise" and not self.pieces:
            raise ValueError("Piecewise functions need 'pieces'")
        return self


class DensitySpec(_Section):
    """Density section: uniform (a or lo/hi), normal (mu, sigma) or table (points or path)."""
    kind: Literal["uniform", "normal", "table"]
    a: Optional[float] = Field(None, gt=0)
    lo: Optional[float] = None
    hi: Optional[float] = None
    mu: Optional[float] = None
    sigma: Optional[float] = Field(None, gt=0)
    points: Optional[List[List[float]]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def check_kind_fields(self) -> "DensitySpec":
        allowed = {
            "uniform": {"a", "lo", "hi"},
            "normal": {"mu", "sigma"},
            "table": {"points", "path"},
        }[self.kind]
        given = {k for k in ("a", "lo", "hi", "mu", "sigma", "points", "path") if getattr(self, k) is not None}
        extra = given - allowed
        if extra:
            raise ValueError(f"Fields {sorted(extra)} do not apply to {self.kind} densities")
        return self

    def params(self) -> Dict[str, Any]:
        fields = ("a", "lo", "hi", "mu", "sigma", "points", "path")
        return {k: getattr(self, k) for k in fields if getattr(self, k) is not None}


# ==================== Run Models ====================

class QuadratureSpec(_Section):
    abs_tol: Optional[float] = Field(None, gt=0, description="Absolute tolerance in bits")
    rel_tol: Optional[float] = Field(None, ge=0)
    max_depth: Optional[int] = Field(None, ge=10)
    mass_eps: Optional[float] = Field(None, gt=0, lt=0.5)
    singularity_pad: Optional[float] = Field(None, gt=0, le=1e-6)


class McSpec(_Section):
    n_samples: int = Field(100_000, ge=1000)
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)


class HistogramSpec(_Section):
    y_bins: int = Field(8, ge=8)
    refinement_levels: int = Field(4, ge=0, le=30)


class TightnessSpec(_Section):
    grid: int = Field(4096, ge=64)
    tol: float = Field(1e-6, gt=0)


class SweepSpec(_Section):
    """Parameter sweep over a dotted config path, e.g. 'density.sigma'."""
    param: str = Field(..., min_length=1)
    values: Optional[List[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = Field(None, ge=1)
    spacing: Literal["linear", "log"] = "linear"
    with_mc: bool = True

    @model_validator(mode="after")
    def check_grid(self) -> "SweepSpec":
        if self.values is None and None in (self.start, self.stop, self.num):
            raise ValueError("Sweep needs 'values' or 'start'/'stop'/'num'")
        if self.values is not None and any(v is not None for v in (self.start, self.stop, self.num)):
            raise ValueError("Give either 'values' or 'start'/'stop'/'num', not both")
        if self.values is None and self.spacing == "log" and (self.start <= 0 or self.stop <= 0):
            raise ValueError("Log spacing needs positive 'start' and 'stop'")
        return self

    def grid(self) -> List[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        if self.spacing == "log":
            return [float(v) for v in np.geomspace(self.start, self.stop, self.num)]
        return [float(v) for v in np.linspace(self.start, self.stop, self.num)]


class CascadeSpec(_Section):
    stages: List[FunctionSpec] = Field(..., min_length=1)
    verify: bool = Field(False, description="Check additivity against the composite (two stages)")


class TightSpec(_Section):
    L: int = Field(..., ge=1)
    signs: Optional[List[int]] = None
    boundaries: Optional[List[float]] = None
    offsets: Optional[List[float]] = Field(None, description="Custom offsets instead of the tight ones")
    table_points: int = Field(64, ge=2, description="Rows per branch in the function table")


class ExperimentConfig(_Section):
    """Complete experiment document."""
    function: Optional[FunctionSpec] = None
    density: DensitySpec
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    tightness: TightnessSpec = Field(default_factory=TightnessSpec)
    mc: Optional[McSpec] = None
    histogram: Optional[HistogramSpec] = None
    sweep: Optional[SweepSpec] = None
    cascade: Optional[CascadeSpec] = None
    tight: Optional[TightSpec] = None


# ==================== Loading ====================

def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a config mapping.

    Raises:
        ConfigurationError: If the mapping does not match the schema
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError("Config does not validate", details=_format_validation_error(e))


def load_config(path: str) -> ExperimentConfig:
    """
    Read and validate a JSON experiment config.

    Raises:
        ConfigurationError: If the file is missing, not JSON, or invalid
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config file {path} is not valid JSON", details=str(e))
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    config = parse_config(data)
    logger.info(f"Loaded config {path}")
    return config


def dump_config(config: ExperimentConfig) -> str:
    """Config as JSON, omitting unset optional fields."""
    return json.dumps(config.model_dump(mode="json", exclude_none=True), indent=2)


def apply_override(config: ExperimentConfig, path: str, value: Any) -> ExperimentConfig:
    """
    Copy of config with the dotted path set to value, validated again.

    List elements are addressed by index ('cascade.stages.0.params.c').

    Raises:
        ConfigurationError: If the path does not exist or the result is invalid
    """
    data = copy.deepcopy(config.model_dump(mode="json", exclude_none=True))
    keys = path.split(".")
    node: Any = data
    for key in keys[:-1]:
        if isinstance(node, list) and key.isdigit() and int(key) < len(node):
            node = node[int(key)]
        elif isinstance(node, dict):
            node = node.setdefault(key, {})
        else:
            raise ConfigurationError(f"Config path '{path}' does not exist")
    last = keys[-1]
    if isinstance(node, list) and last.isdigit() and int(last) < len(node):
        node[int(last)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigurationError(f"Config path '{path}' does not exist")
    if isinstance(value, float) and value.is_integer() and last in ("L", "n_samples", "max_depth"):
        _set_int(data, keys, int(value))
    return parse_config(data)


def _set_int(data: Dict[str, Any], keys: List[str], value: int):
    node: Any = data
    for key in keys[:-1]:
        node = node[int(key)] if isinstance(node, list) else node[key]
    node[keys[-1]] = value


# ==================== Builders ====================

def build_function(spec: FunctionSpec) -> PwmFunction:
    """
    Turn a function section into a PwmFunction.

    Raises:
        InvalidParameterError: If parameters are invalid or a piece is not monotone
    """
    if spec.kind == "catalog":
        return FunctionFactory.create(spec.name, spec.params)
    if spec.kind == "polynomial":
        domain = spec.domain.to_interval() if spec.domain else Interval.real_line()
        return from_polynomial(spec.coeffs, domain)

    branches = []
    for index, piece in enumerate(spec.pieces):
        part = from_polynomial(piece.coeffs, piece.domain.to_interval())
        if part.L != 1:
            raise InvalidParameterError(
                f"pieces.{index}", f"Piece is not strictly monotone on its domain ({part.L} branches)"
            )
        branches.extend(part.branches)
    return PwmFunction(tuple(branches), name="piecewise")


def build_density(spec: DensitySpec) -> Density:
    return DensityFactory.create(spec.kind, spec.params())


def build_quadrature(spec: QuadratureSpec, workers: Optional[int] = None) -> QuadratureConfig:
    overrides = {k: v for k, v in spec.model_dump().items() if v is not None}
    if workers is not None:
        overrides["workers"] = workers
    return QuadratureConfig(**overrides)


def build_mc(spec: Optional[McSpec], workers: Optional[int] = None) -> McConfig:
    """
    Raises:
        ConfigurationError: If no seed is configured
    """
    if spec is None or spec.seed is None:
        raise ConfigurationError(
            "Randomized commands need an explicit seed",
            details="Set mc.seed in the config or pass --seed",
        )
    return McConfig(
        n_samples=spec.n_samples,
        seed=spec.seed,
        n_workers=workers if workers is not None else settings.workers,
    )


def build_histogram(spec: Optional[HistogramSpec]) -> HistogramConfig:
    spec = spec or HistogramSpec()
    return HistogramConfig(y_bins=spec.y_bins, refinement_levels=spec.refinement_levels)
