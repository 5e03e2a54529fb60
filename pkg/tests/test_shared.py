"""
Tests for exit-code mapping and operation timing.
"""

import errno

import pytest

from tasync.errors import (
    BudgetError,
    InvalidCommandError,
    InvalidScenarioError,
    OutputError,
    SampleLimitError,
    UnsupportedNumerologyError,
    UsageError,
)
from utils.metrics import get_metrics, reset_metrics_collector
from utils.shared import ExitCode, map_exception_to_exit_code, time_operation


@pytest.fixture(autouse=True)
def clean_metrics():
    reset_metrics_collector()
    yield
    reset_metrics_collector()


class TestMapExceptionToExitCode:
    @pytest.mark.parametrize(
        "exception,code,prefix",
        [
            (UsageError("--config", "not JSON"), ExitCode.USAGE_ERROR, "usage error:"),
            (UnsupportedNumerologyError(25, "scs_khz"), ExitCode.USAGE_ERROR, "usage error:"),
            (InvalidScenarioError("trials must be >= 1"), ExitCode.INVALID_SCENARIO, "invalid input:"),
            (SampleLimitError(10, 5), ExitCode.INVALID_SCENARIO, "invalid input:"),
            (InvalidCommandError("absolute", 4000, 3846), ExitCode.INVALID_SCENARIO, "invalid input:"),
            (BudgetError("mismatch"), ExitCode.INVALID_SCENARIO, "invalid input:"),
            (OutputError("out.csv", OSError("disk full")), ExitCode.IO_ERROR, "I/O error:"),
            (RuntimeError("unexpected"), ExitCode.INTERNAL_ERROR, "internal error:"),
        ],
    )
    def test_mapping(self, exception, code, prefix):
        mapped, message = map_exception_to_exit_code(exception)
        assert mapped is code
        assert message.startswith(prefix)

    def test_os_error_names_the_path(self):
        error = FileNotFoundError(errno.ENOENT, "No such file or directory", "summary.json")
        code, message = map_exception_to_exit_code(error)
        assert code is ExitCode.IO_ERROR
        assert message == "I/O error: summary.json: No such file or directory"

    def test_usage_error_names_the_flag(self):
        _, message = map_exception_to_exit_code(UsageError("--config", "must contain a JSON object"))
        assert message == "usage error: --config: must contain a JSON object"

    def test_counts_errors_by_type(self):
        map_exception_to_exit_code(BudgetError("x"))
        map_exception_to_exit_code(InvalidScenarioError("y"))
        counters = get_metrics()["counters"]
        assert counters["command_errors[error_type=invalid_scenario]"] == 2.0

    def test_exit_codes_are_stable(self):
        assert [int(c) for c in ExitCode] == [0, 1, 2, 3, 4, 5]


class TestTimeOperation:
    def test_success_metrics(self):
        @time_operation("output", "write")
        def write(text):
            return len(text)

        assert write("abc") == 3
        metrics = get_metrics()
        key = "operations_total[component=output,operation=write,status=success]"
        assert metrics["counters"][key] == 1.0
        assert "operation_last_duration[component=output]" in metrics["gauges"]

    def test_error_metrics_and_reraise(self):
        @time_operation("output", "write")
        def write(text):
            raise OSError("read-only")

        with pytest.raises(OSError):
            write("abc")
        key = "operations_total[component=output,operation=write,status=error]"
        assert get_metrics()["counters"][key] == 1.0

    def test_preserves_metadata(self):
        @time_operation("c", "op")
        def documented():
            """Docstring."""

        assert documented.__name__ == "documented"
        assert documented.__doc__ == "Docstring."
