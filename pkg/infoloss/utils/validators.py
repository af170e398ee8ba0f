"""
Parameter Validation Module

Validation helpers for catalog, density and builder parameters. Every helper
raises one of the coded parameter exceptions so the CLI maps failures to a
configuration error.
"""

import math
from typing import Dict, Any, List, Optional, Sequence

from infoloss.core.exceptions import (
    InvalidParameterError,
    MissingParameterError,
)


class ParameterValidator:
    """
    Validates numeric parameters against rules and constraints.
    """

    @staticmethod
    def validate_required_fields(
        parameters: Dict[str, Any],
        required_fields: List[str]
    ) -> None:
        """
        Validate that all required fields are present.

        Raises:
            MissingParameterError: If a required field is missing
        """
        for field in required_fields:
            if field not in parameters or parameters[field] is None:
                raise MissingParameterError(field)

    @staticmethod
    def validate_allowed_fields(
        parameters: Dict[str, Any],
        allowed_fields: Sequence[str]
    ) -> None:
        """
        Reject parameters the receiver does not understand.

        Raises:
            InvalidParameterError: If an unknown field is present
        """
        for field in parameters:
            if field not in allowed_fields:
                allowed = ", ".join(allowed_fields) or "none"
                raise InvalidParameterError(field, f"Unknown parameter (allowed: {allowed})")

    @staticmethod
    def validate_finite(value: Any, param_name: str) -> float:
        """
        Validate that value is a finite real number and return it as float.

        Raises:
            InvalidParameterError: If value is not a finite number
        """
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidParameterError(param_name, "Must be a number")
        value = float(value)
        if not math.isfinite(value):
            raise InvalidParameterError(param_name, f"Must be finite (got {value})")
        return value

    @staticmethod
    def validate_positive(value: Any, param_name: str) -> float:
        """
        Validate a strictly positive finite number.

        Raises:
            InvalidParameterError: If value <= 0
        """
        value = ParameterValidator.validate_finite(value, param_name)
        if value <= 0:
            raise InvalidParameterError(param_name, f"Must be positive (got {value})")
        return value

    @staticmethod
    def validate_integer_range(
        value: Any,
        param_name: str,
        min_value: Optional[int] = None,
        max_value: Optional[int] = None
    ) -> int:
        """
        Validate integer range constraints.

        Raises:
            InvalidParameterError: If range constraints are violated
        """
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidParameterError(param_name, "Must be an integer")

        if min_value is not None and value < min_value:
            raise InvalidParameterError(
                param_name,
                f"Must be at least {min_value} (got {value})"
            )

        if max_value is not None and value > max_value:
            raise InvalidParameterError(
                param_name,
                f"Must be at most {max_value} (got {value})"
            )
        return value

    @staticmethod
    def validate_probability(value: Any, param_name: str) -> float:
        """
        Validate a probability strictly inside (0, 1).

        Raises:
            InvalidParameterError: If value is outside the range
        """
        value = ParameterValidator.validate_finite(value, param_name)
        if not 0.0 < value < 1.0:
            raise InvalidParameterError(param_name, f"Must lie in (0, 1) (got {value})")
        return value

    @staticmethod
    def validate_signs(signs: Sequence[Any], count: int, param_name: str = 'signs') -> List[int]:
        """
        Validate a list of branch orientations given as +1/-1.

        Raises:
            InvalidParameterError: If the length or an entry is wrong
        """
        if len(signs) != count:
            raise InvalidParameterError(
                param_name,
                f"Expected {count} entries (got {len(signs)})"
            )
        result = []
        for sign in signs:
            if sign not in (1, -1) or isinstance(sign, bool):
                raise InvalidParameterError(param_name, f"Entries must be +1 or -1 (got {sign})")
            result.append(int(sign))
        return result
