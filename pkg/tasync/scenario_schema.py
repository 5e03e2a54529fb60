"""
Scenario documents: the JSON form of every subcommand's inputs.

A document is what ``--config`` files contain and what every output echoes as
its resolved configuration. Flags are turned into a partial document and
deep-merged over the file, which is merged over the defaults; the result is
validated against the subcommand's schema and only then converted into
domain objects.

Times are in nanoseconds inside documents.
"""

import copy
import logging
from typing import Any

from tasync.budget import DEFAULT_TARGET_NS, Policy, TaeVariant
from tasync.channel import ErrorModel, LosGaussianModel, NlosModel
from tasync.errors import InvalidScenarioError
from tasync.pipeline import DeviceClock, PipelineErrors, PipelineScenario
from tasync.simulator import FixedToa, Scenario, ToaPrior, UniformInRange, UniformInSlot
from tasync.timing import SUPPORTED_SCS_KHZ, TA_ABSOLUTE_MAX, Numerology, timing_constants
from utils.validation import (
    ArrayValidator,
    ChoiceValidator,
    RangeValidator,
    Schema,
    TypeValidator,
)

logger = logging.getLogger(__name__)

NS = 1e-9

DEFAULT_SEED = 42
DEFAULT_TRIALS = 1_000_000
DEFAULT_CONFIDENCE = 0.999
DEFAULT_SWEEP_WINDOWS = [1, 2, 4, 8, 16]
PRIOR_KINDS = ("slot", "range", "fixed")
MODEL_KINDS = ("los", "nlos")

# Flag that sets each document field, for error messages.
FLAG_FOR_PATH = {
    "scs_khz": "--scs",
    "trials": "--trials",
    "avg_window": "--avg",
    "avg_windows": "--avg",
    "seed": "--seed",
    "confidence": "--confidence",
    "bias_correction_ns": "--bias-correction-ns",
    "toa_prior.kind": "--prior",
    "toa_prior.center_index": "--center-index",
    "toa_prior.lo_ns": "--toa-lo-ns",
    "toa_prior.hi_ns": "--toa-hi-ns",
    "toa_prior.toa_ns": "--toa-ns",
    "error_model.kind": "--nlos",
    "error_model.sigma_rel": "--sigma-rel",
    "error_model.sigma_ns": "--sigma-ns",
    "error_model.sigma_blocked_rel": "--sigma-blocked-rel",
    "error_model.bias_ns": "--bias-ns",
    "error_model.p_detect": "--p-detect",
    "policy": "--policy",
    "tae": "--tae",
    "include_ul_tx_error": "--include-ul-tx-error",
    "small_area": "--small-area",
    "target_ns": "--target-ns",
    "from_sim": "--from-sim",
    "toa_ns": "--toa-ns",
    "drift_ppm": "--drift-ppm",
    "resync_ms": "--resync-ms",
    "epochs": "--epochs",
    "granularity_ns": "--granularity-ns",
    "dl_error_ns": "--dl-error-ns",
    "asymmetry_ns": "--asymmetry-ns",
    "modem_delay_ns": "--modem-delay-ns",
    "residual_budget_ns": "--residual-ns",
}


# Schemas


def _error_model_fields(schema: Schema) -> Schema:
    return (
        schema.add_field("error_model", TypeValidator(dict))
        .add_field("error_model.kind", ChoiceValidator(MODEL_KINDS))
        .add_field("error_model.sigma_rel", RangeValidator(min_value=0, required=False))
        .add_field("error_model.sigma_ns", RangeValidator(min_value=0, required=False))
        .add_field("error_model.sigma_blocked_rel", RangeValidator(min_value=0, required=False))
        .add_field("error_model.bias_ns", RangeValidator(min_value=0, required=False))
        .add_field("error_model.p_detect", RangeValidator(0.0, 1.0, required=False))
    )


def _measurement_fields(schema: Schema) -> Schema:
    return (
        schema.add_field("scs_khz", ChoiceValidator(SUPPORTED_SCS_KHZ))
        .add_field("seed", RangeValidator(0, 2**64 - 1, integer=True))
    )


def _simulation_schema(name: str, sweep: bool) -> Schema:
    schema = _error_model_fields(_measurement_fields(Schema(name)))
    schema.add_field("trials", RangeValidator(min_value=1, integer=True))
    schema.add_field("confidence", RangeValidator(0.0, 1.0, exclusive_min=True))
    schema.add_field("bias_correction_ns", RangeValidator())
    schema.add_field("toa_prior", TypeValidator(dict))
    schema.add_field("toa_prior.kind", ChoiceValidator(PRIOR_KINDS))
    schema.add_field(
        "toa_prior.center_index", RangeValidator(1, TA_ABSOLUTE_MAX, required=False, integer=True)
    )
    schema.add_field("toa_prior.lo_ns", RangeValidator(min_value=0, required=False))
    schema.add_field("toa_prior.hi_ns", RangeValidator(min_value=0, required=False))
    schema.add_field("toa_prior.toa_ns", RangeValidator(min_value=0, required=False))
    if sweep:
        schema.add_field(
            "avg_windows",
            ArrayValidator(RangeValidator(min_value=1, integer=True), min_length=1),
        )
    else:
        schema.add_field("avg_window", RangeValidator(min_value=1, integer=True))
    return schema


SIM_SCHEMA = _simulation_schema("sim config", sweep=False)
SWEEP_SCHEMA = _simulation_schema("sweep config", sweep=True)

BUDGET_SCHEMA = (
    Schema("budget config")
    .add_field("scs_khz", ChoiceValidator(SUPPORTED_SCS_KHZ))
    .add_field("policy", ChoiceValidator([p.value for p in Policy]))
    .add_field("tae", ChoiceValidator([t.value for t in TaeVariant]))
    .add_field("include_ul_tx_error", TypeValidator(bool))
    .add_field("small_area", TypeValidator(bool))
    .add_field("target_ns", RangeValidator(min_value=0, exclusive_min=True))
    .add_field("from_sim", TypeValidator(str, required=False))
)

PIPELINE_SCHEMA = (
    _error_model_fields(_measurement_fields(Schema("pipeline config")))
    .add_field("avg_window", RangeValidator(min_value=1, integer=True))
    .add_field("toa_ns", RangeValidator(min_value=0))
    .add_field("drift_ppm", RangeValidator())
    .add_field("resync_ms", RangeValidator(min_value=0))
    .add_field("epochs", RangeValidator(min_value=1, integer=True))
    .add_field("granularity_ns", RangeValidator(min_value=0))
    .add_field("dl_error_ns", RangeValidator())
    .add_field("asymmetry_ns", RangeValidator())
    .add_field("modem_delay_ns", RangeValidator())
    .add_field("residual_budget_ns", RangeValidator(min_value=0))
)

SCHEMAS = {
    "sim": SIM_SCHEMA,
    "sweep": SWEEP_SCHEMA,
    "budget": BUDGET_SCHEMA,
    "pipeline": PIPELINE_SCHEMA,
}


# Defaults and merging


def default_document(command: str) -> dict[str, Any]:
    """Fully populated document for ``command``; never read from the environment."""
    error_model = {"kind": "los", "sigma_rel": 0.5}
    if command in ("sim", "sweep"):
        document: dict[str, Any] = {
            "scs_khz": 15,
            "trials": DEFAULT_TRIALS,
            "seed": DEFAULT_SEED,
            "confidence": DEFAULT_CONFIDENCE,
            "bias_correction_ns": 0.0,
            "toa_prior": {"kind": "slot", "center_index": 100},
            "error_model": error_model,
        }
        if command == "sweep":
            document["avg_windows"] = list(DEFAULT_SWEEP_WINDOWS)
        else:
            document["avg_window"] = 1
        return document

    if command == "budget":
        return {
            "scs_khz": 15,
            "policy": Policy.WORST_CASE_SUM.value,
            "tae": TaeVariant.TX_DIVERSITY.value,
            "include_ul_tx_error": False,
            "small_area": False,
            "target_ns": DEFAULT_TARGET_NS,
        }

    if command == "pipeline":
        return {
            "scs_khz": 15,
            "seed": DEFAULT_SEED,
            "avg_window": 1,
            "error_model": error_model,
            "toa_ns": 1000.0,
            "drift_ppm": 10.0,
            "resync_ms": 10.0,
            "epochs": 1000,
            "granularity_ns": 250.0,
            "dl_error_ns": 0.0,
            "asymmetry_ns": 0.0,
            "modem_delay_ns": 0.0,
            "residual_budget_ns": 100.0,
        }

    raise InvalidScenarioError(f"No configuration document for command '{command}'")


def merge_documents(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """
    Deep-merge ``override`` over ``base`` without mutating either.

    A ``None`` override deletes the key. A nested object whose ``kind``
    changes replaces the base object instead of merging into it.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if value is None:
            merged.pop(key, None)
        elif isinstance(value, dict) and isinstance(merged.get(key), dict):
            current = merged[key]
            if "kind" in value and value["kind"] != current.get("kind"):
                merged[key] = {k: v for k, v in value.items() if v is not None}
            else:
                merged[key] = merge_documents(current, value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def validate_document(command: str, document: dict[str, Any]) -> dict[str, Any]:
    """
    Check ``document`` against the schema of ``command``.

    Raises:
        InvalidScenarioError: Listing every invalid field with the flag that sets it
    """
    result = SCHEMAS[command].validate(document)
    if not result.is_valid:
        lines = []
        for error in result.errors:
            flag = FLAG_FOR_PATH.get(error.field_path)
            lines.append(f"{error.error_message}" + (f" ({flag})" if flag else ""))
        raise InvalidScenarioError("Invalid configuration:\n" + "\n".join(f"  - {m}" for m in lines))
    return document


def resolve_document(
    command: str,
    file_document: dict[str, Any] | None = None,
    flag_document: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Defaults, then the config file, then flags; validated."""
    document = default_document(command)
    if file_document:
        document = merge_documents(document, file_document)
    if flag_document:
        document = merge_documents(document, flag_document)

    logger.debug(
        f"Resolved {command} configuration",
        extra={"action": "config_resolved", "command": command, "document": document},
    )
    return validate_document(command, document)


# Document -> domain objects


def _require(section: dict[str, Any], key: str, path: str) -> Any:
    if section.get(key) is None:
        flag = FLAG_FOR_PATH.get(f"{path}.{key}")
        hint = f" ({flag})" if flag else ""
        raise InvalidScenarioError(f"'{path}.{key}' is required{hint}")
    return section[key]


def _sigma(section: dict[str, Any], slot_width: float) -> float:
    if section.get("sigma_ns") is not None:
        return float(section["sigma_ns"]) * NS
    return float(section.get("sigma_rel", 0.5)) * slot_width


def error_model_from_document(section: dict[str, Any], n: Numerology) -> ErrorModel:
    slot_width = timing_constants(n).slot_width
    sigma = _sigma(section, slot_width)
    if section["kind"] == "los":
        return LosGaussianModel(sigma)
    return NlosModel(
        sigma_detected=sigma,
        sigma_blocked=float(section.get("sigma_blocked_rel", 1.0)) * slot_width,
        bias_bp=float(section.get("bias_ns", 100.0)) * NS,
        p_detect=float(section.get("p_detect", 0.9)),
    )


def prior_from_document(section: dict[str, Any]) -> ToaPrior:
    kind = section["kind"]
    if kind == "slot":
        return UniformInSlot(int(section.get("center_index", 100)))
    if kind == "range":
        return UniformInRange(
            float(_require(section, "lo_ns", "toa_prior")) * NS,
            float(_require(section, "hi_ns", "toa_prior")) * NS,
        )
    return FixedToa(float(_require(section, "toa_ns", "toa_prior")) * NS)


def scenario_from_document(document: dict[str, Any]) -> Scenario:
    """Build the :class:`Scenario` of a sim or sweep document (first window for sweeps)."""
    n = Numerology.from_scs(document["scs_khz"])
    avg_window = document.get("avg_window") or min(document.get("avg_windows") or [1])
    return Scenario(
        numerology=n,
        toa_prior=prior_from_document(document["toa_prior"]),
        error_model=error_model_from_document(document["error_model"], n),
        trials=document["trials"],
        avg_window=avg_window,
        seed=document["seed"],
        confidence=float(document["confidence"]),
        bias_correction=float(document["bias_correction_ns"]) * NS,
    )


def pipeline_from_document(document: dict[str, Any]) -> tuple[DeviceClock, PipelineScenario]:
    """Initial clock and pipeline scenario of a pipeline document."""
    n = Numerology.from_scs(document["scs_khz"])
    granularity_ns = float(document["granularity_ns"])
    errors = PipelineErrors(
        granularity=granularity_ns * NS if granularity_ns > 0 else None,
        dl_timing_error=float(document["dl_error_ns"]) * NS,
        asymmetry=float(document["asymmetry_ns"]) * NS,
        modem_delay=float(document["modem_delay_ns"]) * NS,
    )
    scenario = PipelineScenario(
        numerology=n,
        error_model=error_model_from_document(document["error_model"], n),
        true_toa=float(document["toa_ns"]) * NS,
        avg_window=document["avg_window"],
        seed=document["seed"],
        errors=errors,
    )
    return DeviceClock(offset=0.0, drift_ppm=float(document["drift_ppm"])), scenario
