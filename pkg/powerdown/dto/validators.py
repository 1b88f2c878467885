"""
Validators for powerdown file models - wraps Pydantic's validators
"""

from typing import Any, Callable

from pydantic import field_validator as pydantic_field_validator, model_validator as pydantic_model_validator

from powerdown.core import ArgumentError, format_rational, parse_rational


def validator(*field_names: str, mode: str = 'after', **kwargs) -> Callable:
    """
    Field validator decorator - wraps Pydantic's field_validator.

    Args:
        *field_names: Names of the fields to validate
        mode: Validation mode ('before', 'after', 'wrap', 'plain')
        **kwargs: Additional validator parameters

    Example:
        class JobRecord(PowerdownBaseModel):
            c: str

            @validator('c')
            @classmethod
            def positive(cls, value):
                if parse_rational(value) <= 0:
                    raise ValueError('c must be positive')
                return value
    """
    def decorator(func: Callable) -> Callable:
        return pydantic_field_validator(*field_names, mode=mode, **kwargs)(func)
    return decorator


def root_validator(*, mode: str = 'after', **kwargs) -> Callable:
    """
    Model-level validator decorator - validates the entire model.

    Args:
        mode: Validation mode ('before', 'after', 'wrap')
        **kwargs: Additional validator parameters
    """
    def decorator(func: Callable) -> Callable:
        return pydantic_model_validator(mode=mode, **kwargs)(func)
    return decorator


def rational_text(value: Any) -> str:
    """
    Normalizes a rational given as "p/q", a decimal string or a number to
    canonical "p/q" text.

    Raises:
        ValueError: If the value is not a rational number.
    """
    try:
        return format_rational(parse_rational(value))
    except ArgumentError as e:
        raise ValueError(str(e)) from None
