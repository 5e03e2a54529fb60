"""
Exception types raised by the timing, simulation, budget and pipeline modules.
"""


class TaSyncError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedNumerologyError(TaSyncError, ValueError):
    """Raised when a numerology or subcarrier spacing is outside {15, 30, 60, 120} kHz."""

    def __init__(self, value: int, unit: str = "mu"):
        self.value = value
        self.unit = unit
        if unit == "scs_khz":
            super().__init__(
                f"Unsupported subcarrier spacing {value} kHz; expected one of 15, 30, 60, 120"
            )
        else:
            super().__init__(f"Unsupported numerology mu={value}; expected 0, 1, 2 or 3")


class InvalidCommandError(TaSyncError, ValueError):
    """Raised when a TA command index is outside its signalled range."""

    def __init__(self, kind: str, index: int, max_index: int):
        self.kind = kind
        self.index = index
        self.max_index = max_index
        super().__init__(f"{kind} TA index {index} outside [0, {max_index}]")


class InvalidScenarioError(TaSyncError, ValueError):
    """Raised when a scenario, model or operation input violates its preconditions."""


class SampleLimitError(InvalidScenarioError):
    """Raised when a run would retain more error samples than allowed."""

    def __init__(self, trials: int, limit: int):
        self.trials = trials
        self.limit = limit
        super().__init__(
            f"{trials} trials exceeds the retained-sample limit of {limit}; "
            "streaming quantiles are not supported"
        )


class BudgetError(TaSyncError, ValueError):
    """Raised for invalid budget inputs (unknown SCS, numerology mismatch)."""


class OutputError(TaSyncError):
    """Raised when a result file cannot be written."""

    def __init__(self, path: str, cause: Exception):
        self.path = path
        self.cause = cause
        super().__init__(f"Failed to write {path}: {cause}")


class UsageError(TaSyncError):
    """Raised for a bad command-line or configuration-file value; names the flag."""

    def __init__(self, flag: str, message: str):
        self.flag = flag
        super().__init__(f"{flag}: {message}")
