"""
Input Densities

Uniform, normal and tabulated densities, push-forward through a function,
and mass truncation of unbounded supports.
"""

from .base import Density, NormalDensity, PushforwardDensity, TableDensity, UniformDensity, pushforward, truncated_support
from .factory import DensityFactory, builtin

__all__ = [
    'Density',
    'NormalDensity',
    'PushforwardDensity',
    'TableDensity',
    'UniformDensity',
    'pushforward',
    'truncated_support',
    'DensityFactory',
    'builtin',
]
