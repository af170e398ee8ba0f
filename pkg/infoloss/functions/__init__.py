"""
Piecewise Strictly Monotone Functions

Branch representation, validation, preimages, polynomial decomposition and
the catalog of named functions.
"""

from .base import Branch, Interval, Orientation, PreimageSet, PwmFunction, ValidationReport, preimage, validate
from .factory import FunctionFactory, catalog
from .polynomial import from_polynomial

__all__ = [
    'Branch',
    'Interval',
    'Orientation',
    'PreimageSet',
    'PwmFunction',
    'ValidationReport',
    'preimage',
    'validate',
    'FunctionFactory',
    'catalog',
    'from_polynomial',
]
