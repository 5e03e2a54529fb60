"""
Schema validation for JSON configuration documents.

A :class:`Schema` maps dotted field paths to field validators and reports
every problem at once, each with the path of the offending field.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

logger = logging.getLogger(__name__)


@dataclass
class ValidationError:
    """Individual validation error details."""

    field_path: str
    expected: str
    actual_value: Any
    error_message: str


@dataclass
class ValidationResult:
    """Result of validating one document."""

    is_valid: bool
    errors: list[ValidationError]
    schema_name: str | None = None

    @property
    def has_errors(self) -> bool:
        return len(self.errors) > 0

    def messages(self) -> list[str]:
        return [e.error_message for e in self.errors]


def _missing(field_path: str, expected: str) -> ValidationError:
    return ValidationError(
        field_path=field_path,
        expected=expected,
        actual_value=None,
        error_message=f"Required field '{field_path}' is missing or null",
    )


class FieldValidator(ABC):
    """Abstract base class for field validators."""

    def __init__(self, required: bool = True):
        self.required = required

    def validate(self, value: Any, field_path: str) -> list[ValidationError]:
        if value is None:
            return [_missing(field_path, self.expected())] if self.required else []
        return self.check(value, field_path)

    @abstractmethod
    def expected(self) -> str:
        """Human description of an acceptable value."""

    @abstractmethod
    def check(self, value: Any, field_path: str) -> list[ValidationError]:
        """Validate a present (non-null) value."""


class TypeValidator(FieldValidator):
    """Value must be an instance of one of ``expected_types`` (bool is never a number)."""

    def __init__(self, expected_types: type | list[type], required: bool = True):
        super().__init__(required)
        self.expected_types = (
            expected_types if isinstance(expected_types, list) else [expected_types]
        )

    def expected(self) -> str:
        return " or ".join(t.__name__ for t in self.expected_types)

    def check(self, value: Any, field_path: str) -> list[ValidationError]:
        is_bool_mismatch = isinstance(value, bool) and bool not in self.expected_types
        if is_bool_mismatch or not any(isinstance(value, t) for t in self.expected_types):
            return [
                ValidationError(
                    field_path=field_path,
                    expected=self.expected(),
                    actual_value=value,
                    error_message=f"Field '{field_path}' expected {self.expected()}, got {type(value).__name__}",
                )
            ]
        return []


class RangeValidator(FieldValidator):
    """Numeric value within [min_value, max_value]; ``integer`` rejects fractions."""

    def __init__(
        self,
        min_value: float | None = None,
        max_value: float | None = None,
        required: bool = True,
        integer: bool = False,
        exclusive_min: bool = False,
    ):
        super().__init__(required)
        self.min_value = min_value
        self.max_value = max_value
        self.integer = integer
        self.exclusive_min = exclusive_min

    def expected(self) -> str:
        kind = "integer" if self.integer else "number"
        low = "" if self.min_value is None else f" {'>' if self.exclusive_min else '>='} {self.min_value}"
        high = "" if self.max_value is None else f" <= {self.max_value}"
        return f"{kind}{low}{high}"

    def check(self, value: Any, field_path: str) -> list[ValidationError]:
        numeric = isinstance(value, int | float) and not isinstance(value, bool)
        if not numeric or (self.integer and not isinstance(value, int)):
            return [
                ValidationError(
                    field_path=field_path,
                    expected=self.expected(),
                    actual_value=value,
                    error_message=f"Field '{field_path}' must be {'an integer' if self.integer else 'a number'}",
                )
            ]
        if isinstance(value, float) and not math.isfinite(value):
            return [
                ValidationError(
                    field_path=field_path,
                    expected=self.expected(),
                    actual_value=value,
                    error_message=f"Field '{field_path}' must be finite",
                )
            ]

        below = self.min_value is not None and (
            value <= self.min_value if self.exclusive_min else value < self.min_value
        )
        above = self.max_value is not None and value > self.max_value
        if below or above:
            return [
                ValidationError(
                    field_path=field_path,
                    expected=self.expected(),
                    actual_value=value,
                    error_message=f"Field '{field_path}' value {value} is outside {self.expected()}",
                )
            ]
        return []


class ChoiceValidator(FieldValidator):
    """Value must be one of ``choices``."""

    def __init__(self, choices: Iterable[Any], required: bool = True):
        super().__init__(required)
        self.choices = list(choices)

    def expected(self) -> str:
        return f"one of {self.choices}"

    def check(self, value: Any, field_path: str) -> list[ValidationError]:
        if isinstance(value, bool) or value not in self.choices:
            return [
                ValidationError(
                    field_path=field_path,
                    expected=self.expected(),
                    actual_value=value,
                    error_message=f"Field '{field_path}' must be {self.expected()}, got {value!r}",
                )
            ]
        return []


class ArrayValidator(FieldValidator):
    """List with optional length bounds and per-item validation."""

    def __init__(
        self,
        item_validator: FieldValidator | None = None,
        min_length: int | None = None,
        max_length: int | None = None,
        required: bool = True,
    ):
        super().__init__(required)
        self.item_validator = item_validator
        self.min_length = min_length
        self.max_length = max_length

    def expected(self) -> str:
        return "array"

    def check(self, value: Any, field_path: str) -> list[ValidationError]:
        if not isinstance(value, list):
            return [
                ValidationError(
                    field_path=field_path,
                    expected="array",
                    actual_value=value,
                    error_message=f"Field '{field_path}' must be an array",
                )
            ]

        errors = []
        lo, hi = self.min_length, self.max_length
        if (lo is not None and len(value) < lo) or (hi is not None and len(value) > hi):
            bounds = f"{lo if lo is not None else 0}..{hi if hi is not None else '*'}"
            errors.append(
                ValidationError(
                    field_path=field_path,
                    expected=f"{bounds} values",
                    actual_value=value,
                    error_message=f"Field '{field_path}' lists {len(value)} values, expected {bounds}",
                )
            )
        if self.item_validator:
            for i, item in enumerate(value):
                errors.extend(self.item_validator.validate(item, f"{field_path}[{i}]"))
        return errors


class Schema:
    """Named set of field validators keyed by dotted path."""

    def __init__(self, name: str, allow_unknown: bool = False):
        self.name = name
        self.allow_unknown = allow_unknown
        self.fields: dict[str, FieldValidator] = {}

    def add_field(self, field_path: str, validator: FieldValidator) -> "Schema":
        self.fields[field_path] = validator
        return self

    def validate(self, document: dict[str, Any]) -> ValidationResult:
        errors: list[ValidationError] = []

        if not isinstance(document, dict):
            errors.append(
                ValidationError(
                    field_path="",
                    expected="object",
                    actual_value=document,
                    error_message=f"{self.name} document must be a JSON object",
                )
            )
            return ValidationResult(False, errors, self.name)

        for field_path, validator in self.fields.items():
            errors.extend(validator.validate(get_nested_value(document, field_path), field_path))

        if not self.allow_unknown:
            top_level = {path.split(".")[0] for path in self.fields}
            for key in document:
                if key not in top_level:
                    errors.append(
                        ValidationError(
                            field_path=key,
                            expected="known field",
                            actual_value=document[key],
                            error_message=f"Unknown field '{key}' in {self.name}",
                        )
                    )

        result = ValidationResult(not errors, errors, self.name)
        if result.has_errors:
            logger.debug(
                f"{self.name} validation failed with {len(errors)} error(s)",
                extra={
                    "action": "schema_validation_failed",
                    "schema_name": self.name,
                    "field_paths": [e.field_path for e in errors],
                },
            )
        return result


def get_nested_value(data: dict[str, Any], field_path: str) -> Any:
    """Value at a dotted path, or None if any segment is absent."""
    current: Any = data
    for key in field_path.split("."):
        if isinstance(current, dict) and key in current:
            current = current[key]
        else:
            return None
    return current
