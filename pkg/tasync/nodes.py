"""
Flow nodes behind the command-line subcommands.

Every subcommand runs the same flow shape over a shared dict::

    ResolveConfigNode - "<command>" >> <Command>Node >> RenderNode >> WriteNode

Shared keys read: ``command``, ``config`` (SimulatorConfig), ``config_path``,
``flag_document``, ``format``, ``output``, ``summary_path``, ``workers``.
Shared keys written: ``document``, ``result``, ``outputs``, ``target_missed``.
"""

import json
import logging
from dataclasses import dataclass
from typing import Any

from tasync.budget import (
    BudgetInputs,
    BudgetReport,
    Policy,
    TaeRequirement,
    TaeVariant,
    aggregate,
    builtin_components,
    substitute_ta_error,
    tae_requirements,
)
from tasync.config import SimulatorConfig
from tasync.errors import InvalidScenarioError, UsageError
from tasync.output import (
    load_sim_summary,
    render_budget,
    render_constants,
    render_pipeline,
    render_sim_csv,
    render_sim_json,
    render_sim_table,
    render_sweep_csv,
    render_sweep_json,
    render_sweep_table,
    resolve_output_path,
    write_output,
)
from tasync.pipeline import SyncTrace, max_resync_interval, simulate_sync_epochs
from tasync.scenario_schema import pipeline_from_document, resolve_document, scenario_from_document
from tasync.simulator import SimResult, run_scenario, sweep_avg_windows
from tasync.timing import constants_table
from utils.node import Flow, Node

logger = logging.getLogger(__name__)

COMMANDS = ("constants", "sim", "sweep", "budget", "pipeline")

DEFAULT_FORMATS = {
    "constants": "table",
    "sim": "csv",
    "sweep": "csv",
    "budget": "table",
    "pipeline": "csv",
}


def load_config_file(path: str) -> dict[str, Any]:
    """
    Read a ``--config`` JSON document.

    Raises:
        UsageError: If the file is not a JSON object
    """
    with open(path, encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError("--config", f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise UsageError("--config", f"{path} must contain a JSON object")
    return document


class ResolveConfigNode(Node[tuple[str, str | None, dict[str, Any]], dict[str, Any]]):
    """Merge defaults, the config file and flags into a validated document."""

    def prep(self, shared: dict[str, Any]) -> tuple[str, str | None, dict[str, Any]]:
        return (
            shared["command"],
            shared.get("config_path"),
            shared.get("flag_document") or {},
        )

    def exec(self, prep_result: tuple[str, str | None, dict[str, Any]]) -> dict[str, Any]:
        command, config_path, flag_document = prep_result
        if command == "constants":
            return {}
        file_document = load_config_file(config_path) if config_path else None
        return resolve_document(command, file_document, flag_document)

    def post(self, shared: dict[str, Any], prep_result: Any, exec_result: dict[str, Any]) -> str:
        shared["document"] = exec_result
        return shared["command"]


@dataclass(frozen=True)
class RunInputs:
    document: dict[str, Any]
    workers: int
    max_retained_samples: int


def _run_inputs(shared: dict[str, Any]) -> RunInputs:
    config: SimulatorConfig = shared["config"]
    return RunInputs(
        document=shared["document"],
        workers=shared.get("workers") or config.workers,
        max_retained_samples=config.max_retained_samples,
    )


class ConstantsNode(Node[None, list[dict[str, Any]]]):
    def prep(self, shared: dict[str, Any]) -> None:
        return None

    def exec(self, prep_result: None) -> list[dict[str, Any]]:
        return constants_table()

    def post(self, shared: dict[str, Any], prep_result: None, exec_result: list[dict[str, Any]]) -> str:
        shared["result"] = exec_result
        return "default"


class SimNode(Node[RunInputs, SimResult]):
    """One Monte Carlo scenario."""

    def prep(self, shared: dict[str, Any]) -> RunInputs:
        return _run_inputs(shared)

    def exec(self, prep_result: RunInputs) -> SimResult:
        scenario = scenario_from_document(prep_result.document)
        return run_scenario(
            scenario,
            workers=prep_result.workers,
            max_retained_samples=prep_result.max_retained_samples,
        )

    def post(self, shared: dict[str, Any], prep_result: RunInputs, exec_result: SimResult) -> str:
        shared["result"] = exec_result
        return "default"


class SweepNode(Node[RunInputs, list[tuple[int, SimResult]]]):
    """The same scenario once per averaging window."""

    def prep(self, shared: dict[str, Any]) -> RunInputs:
        return _run_inputs(shared)

    def exec(self, prep_result: RunInputs) -> list[tuple[int, SimResult]]:
        base = scenario_from_document(prep_result.document)
        return sweep_avg_windows(
            base,
            prep_result.document["avg_windows"],
            workers=prep_result.workers,
            max_retained_samples=prep_result.max_retained_samples,
        )

    def post(
        self, shared: dict[str, Any], prep_result: RunInputs, exec_result: list[tuple[int, SimResult]]
    ) -> str:
        shared["result"] = exec_result
        return "default"


@dataclass(frozen=True)
class BudgetOutcome:
    report: BudgetReport
    requirements: list[TaeRequirement]


class BudgetNode(Node[dict[str, Any], BudgetOutcome]):
    """Aggregate the budget, optionally with a simulated TA error."""

    def prep(self, shared: dict[str, Any]) -> dict[str, Any]:
        return shared["document"]

    def exec(self, prep_result: dict[str, Any]) -> BudgetOutcome:
        document = prep_result
        components = builtin_components(
            tae_variant=TaeVariant(document["tae"]),
            include_ul_tx_error=document["include_ul_tx_error"],
            small_area=document["small_area"],
        )
        inputs = BudgetInputs(
            components=components,
            scs_khz=document["scs_khz"],
            policy=Policy(document["policy"]),
            target_ns=float(document["target_ns"]),
        )

        if document.get("from_sim"):
            report = substitute_ta_error(inputs, load_sim_summary(document["from_sim"]))
        else:
            report = aggregate(inputs.components, inputs.scs_khz, inputs.policy, inputs.target_ns)
        return BudgetOutcome(report, tae_requirements())

    def post(self, shared: dict[str, Any], prep_result: dict[str, Any], exec_result: BudgetOutcome) -> str:
        shared["result"] = exec_result
        shared["target_missed"] = not exec_result.report.passed
        return "default"


@dataclass(frozen=True)
class PipelineOutcome:
    trace: SyncTrace
    resync_interval: float


class PipelineNode(Node[dict[str, Any], PipelineOutcome]):
    """Drift and RTI correction over a run of epochs."""

    def prep(self, shared: dict[str, Any]) -> dict[str, Any]:
        return shared["document"]

    def exec(self, prep_result: dict[str, Any]) -> PipelineOutcome:
        document = prep_result
        clock, scenario = pipeline_from_document(document)
        trace = simulate_sync_epochs(
            clock, scenario, document["epochs"], float(document["resync_ms"]) * 1e-3
        )
        interval = max_resync_interval(
            abs(float(document["drift_ppm"])), float(document["residual_budget_ns"])
        )
        return PipelineOutcome(trace, interval)

    def post(self, shared: dict[str, Any], prep_result: dict[str, Any], exec_result: PipelineOutcome) -> str:
        shared["result"] = exec_result
        return "default"


@dataclass(frozen=True)
class RenderInputs:
    command: str
    fmt: str
    result: Any
    document: dict[str, Any]
    output: str
    summary_path: str | None


class RenderNode(Node[RenderInputs, list[tuple[str, str]]]):
    """Turn the command result into ``(path, text)`` pairs."""

    def prep(self, shared: dict[str, Any]) -> RenderInputs:
        config: SimulatorConfig = shared["config"]
        command = shared["command"]
        summary_path = shared.get("summary_path")
        return RenderInputs(
            command=command,
            fmt=shared.get("format") or DEFAULT_FORMATS[command],
            result=shared["result"],
            document=shared["document"],
            output=resolve_output_path(shared.get("output"), config.output_dir),
            summary_path=(
                resolve_output_path(summary_path, config.output_dir) if summary_path else None
            ),
        )

    def exec(self, prep_result: RenderInputs) -> list[tuple[str, str]]:
        r = prep_result
        if r.command == "constants":
            return [(r.output, render_constants(r.result, r.fmt))]

        if r.command == "sim":
            summary = r.result.summary()
            if r.fmt == "json":
                main = render_sim_json(summary, r.document)
            elif r.fmt == "table":
                main = render_sim_table(summary)
            else:
                main = render_sim_csv(r.result, r.document)
            outputs = [(r.output, main)]
            if r.summary_path:
                outputs.append((r.summary_path, render_sim_json(summary, r.document)))
            return outputs

        if r.command == "sweep":
            if r.fmt == "json":
                return [(r.output, render_sweep_json(r.result, r.document))]
            if r.fmt == "table":
                return [(r.output, render_sweep_table(r.result))]
            return [(r.output, render_sweep_csv(r.result, r.document))]

        if r.command == "budget":
            requirements = r.result.requirements if r.fmt != "csv" else None
            return [(r.output, render_budget(r.result.report, r.document, r.fmt, requirements))]

        if r.command == "pipeline":
            text = render_pipeline(r.result.trace, r.document, r.fmt, r.result.resync_interval)
            return [(r.output, text)]

        raise InvalidScenarioError(f"Unknown command '{r.command}'")

    def post(
        self, shared: dict[str, Any], prep_result: RenderInputs, exec_result: list[tuple[str, str]]
    ) -> str:
        shared["outputs"] = exec_result
        return "default"


class WriteNode(Node[list[tuple[str, str]], int]):
    """Write every rendered output; last node of the flow."""

    def prep(self, shared: dict[str, Any]) -> list[tuple[str, str]]:
        return shared["outputs"]

    def exec(self, prep_result: list[tuple[str, str]]) -> int:
        written = 0
        for path, text in prep_result:
            write_output(text, path)
            written += len(text)
        return written

    def post(self, shared: dict[str, Any], prep_result: list[tuple[str, str]], exec_result: int) -> None:
        shared["bytes_written"] = exec_result
        return None


def create_command_flow() -> Flow:
    """Flow that resolves, runs, renders and writes any subcommand."""
    resolve = ResolveConfigNode()
    render = RenderNode()
    write = WriteNode()

    resolve - "constants" >> ConstantsNode() >> render
    resolve - "sim" >> SimNode() >> render
    resolve - "sweep" >> SweepNode() >> render
    resolve - "budget" >> BudgetNode() >> render
    resolve - "pipeline" >> PipelineNode() >> render
    render >> write

    return Flow(resolve, flow_id="tasync_command")


def run_command(shared: dict[str, Any]) -> dict[str, Any]:
    """Run the flow for ``shared["command"]``."""
    if shared.get("command") not in COMMANDS:
        raise UsageError("command", f"must be one of {', '.join(COMMANDS)}")
    return create_command_flow().run(shared)
