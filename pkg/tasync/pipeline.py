"""
End-to-end reference time indication (RTI) model.

The base station timestamps the antenna-emission instant of the RTI reference
point, floored to the signalling granularity. The device sets its clock to
``timestamp + TOA estimate + DL frame timing error`` (plus any constant modem
delay) at the true arrival instant, then free-runs with a constant frequency
error until the next indication.

Sign convention: a positive offset means the device clock is ahead of the
reference.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from tasync.channel import ErrorModel, RandomStream, substream_id
from tasync.errors import InvalidScenarioError
from tasync.simulator import TRIAL_BLOCK, FixedToa, Scenario, simulate_estimates
from tasync.timing import Numerology

logger = logging.getLogger(__name__)

DEFAULT_GRANULARITY = 250e-9
PHASE_LANE = 2**22  # emission-phase draws; clear of the measurement lanes


@dataclass(frozen=True)
class DeviceClock:
    offset: float  # device time minus reference time, seconds
    drift_ppm: float
    last_sync: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.drift_ppm):
            raise InvalidScenarioError(f"drift_ppm must be finite, got {self.drift_ppm}")

    def drift_over(self, dt: float) -> float:
        return self.drift_ppm * 1e-6 * dt

    def advance(self, dt: float) -> "DeviceClock":
        """Clock after free-running for ``dt`` seconds."""
        return replace(self, offset=self.offset + self.drift_over(dt))


@dataclass(frozen=True)
class RtiMessage:
    """Broadcast timestamp; ``granularity`` 0 marks an unquantized timestamp."""

    timestamp: float
    granularity: float


@dataclass(frozen=True)
class PipelineErrors:
    """Deterministic error terms injected on top of the sampled TOA error."""

    granularity: float | None = DEFAULT_GRANULARITY  # None: ideal timestamps
    dl_timing_error: float = 0.0
    asymmetry: float = 0.0  # signed DL/UL propagation difference added to the TOA estimate
    modem_delay: float = 0.0

    def __post_init__(self) -> None:
        if self.granularity is not None and not self.granularity > 0:
            raise InvalidScenarioError(f"granularity must be > 0, got {self.granularity}")


@dataclass(frozen=True)
class PipelineScenario:
    numerology: Numerology
    error_model: ErrorModel
    true_toa: float  # one-way propagation delay of the static device
    avg_window: int = 1
    seed: int = 42
    errors: PipelineErrors = field(default_factory=PipelineErrors)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.true_toa) and self.true_toa >= 0):
            raise InvalidScenarioError(f"true_toa must be finite and >= 0, got {self.true_toa}")
        if self.avg_window < 1:
            raise InvalidScenarioError(f"avg_window must be >= 1, got {self.avg_window}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    pre_offset: float
    post_offset: float


@dataclass(frozen=True)
class SyncTrace:
    records: list[EpochRecord]
    final_clock: DeviceClock

    @property
    def pre_offsets(self) -> np.ndarray:
        return np.array([r.pre_offset for r in self.records])

    @property
    def post_offsets(self) -> np.ndarray:
        return np.array([r.post_offset for r in self.records])


def _floor_ticks(true_time: float, granularity: float) -> int:
    ticks = math.floor(true_time / granularity)
    # the division can round across a tick boundary
    if ticks * granularity > true_time:
        ticks -= 1
    elif (ticks + 1) * granularity <= true_time:
        ticks += 1
    return ticks


def broadcast_rti(true_time: float, granularity: float) -> RtiMessage:
    """Timestamp ``true_time`` floored to the granularity grid."""
    if not granularity > 0:
        raise InvalidScenarioError(f"granularity must be > 0, got {granularity}")
    ticks = _floor_ticks(true_time, granularity)
    return RtiMessage(timestamp=ticks * granularity, granularity=granularity)


def device_correct(
    clock: DeviceClock,
    msg: RtiMessage,
    toa_estimate: float,
    dl_timing_error: float,
    true_arrival: float,
    modem_delay: float = 0.0,
) -> DeviceClock:
    """Clock after applying one reference time indication at ``true_arrival``."""
    if toa_estimate < 0:
        raise InvalidScenarioError(f"toa_estimate must be >= 0, got {toa_estimate}")

    device_time = msg.timestamp + toa_estimate + dl_timing_error + modem_delay
    return replace(clock, offset=device_time - true_arrival, last_sync=true_arrival)


def max_resync_interval(drift_ppm: float, residual_budget_ns: float) -> float:
    """
    Longest time between indications before drift consumes ``residual_budget_ns``.

    Returns ``math.inf`` for a drift-free clock.
    """
    if drift_ppm < 0:
        raise InvalidScenarioError(f"drift_ppm must be >= 0, got {drift_ppm}")
    if residual_budget_ns < 0:
        raise InvalidScenarioError(f"residual budget must be >= 0, got {residual_budget_ns}")
    if drift_ppm == 0:
        return math.inf
    # ns / (ppm * 1e3) == (ns * 1e-9) / (ppm * 1e-6), one rounding
    return residual_budget_ns / (drift_ppm * 1e3)


def _emission_phases(seed: int, epochs: int) -> np.ndarray:
    blocks = -(-epochs // TRIAL_BLOCK)
    parts = []
    for block in range(blocks):
        count = min(TRIAL_BLOCK, epochs - block * TRIAL_BLOCK)
        parts.append(RandomStream(seed, substream_id(block, PHASE_LANE)).uniform(count))
    return np.concatenate(parts)


def simulate_sync_epochs(
    clock: DeviceClock,
    scenario: PipelineScenario,
    epochs: int,
    resync_period: float,
    start_time: float = 0.0,
) -> SyncTrace:
    """
    Alternate free-running drift and RTI corrections for ``epochs`` periods.

    TOA estimates for epoch e come from trial e of a fixed-TOA simulator run
    with the same seed, so they follow the Monte Carlo error distribution.
    """
    if epochs < 1:
        raise InvalidScenarioError(f"epochs must be >= 1, got {epochs}")
    if not resync_period >= 0:
        raise InvalidScenarioError(f"resync_period must be >= 0, got {resync_period}")

    measurement = Scenario(
        numerology=scenario.numerology,
        toa_prior=FixedToa(scenario.true_toa),
        error_model=scenario.error_model,
        trials=epochs,
        avg_window=scenario.avg_window,
        seed=scenario.seed,
    )
    estimates = simulate_estimates(measurement).estimates
    errors = scenario.errors
    granularity = errors.granularity
    phases = _emission_phases(scenario.seed, epochs) * (granularity or 0.0)
    drift_step = clock.drift_over(resync_period)

    logger.info(
        f"Simulating {epochs} sync epochs every {resync_period * 1e3:.3f} ms",
        extra={
            "action": "pipeline_started",
            "epochs": epochs,
            "resync_period": resync_period,
            "drift_ppm": clock.drift_ppm,
            "scs_khz": scenario.numerology.scs_khz,
            "seed": scenario.seed,
        },
    )

    records = []
    for e in range(epochs):
        pre_offset = clock.offset + drift_step
        clock = replace(clock, offset=pre_offset)

        emission = start_time + (e + 1) * resync_period + phases[e]
        if granularity is None:
            msg = RtiMessage(timestamp=emission, granularity=0.0)
        else:
            msg = broadcast_rti(emission, granularity)

        toa_estimate = max(float(estimates[e]) + errors.asymmetry, 0.0)
        clock = device_correct(
            clock,
            msg,
            toa_estimate,
            errors.dl_timing_error,
            true_arrival=emission + scenario.true_toa,
            modem_delay=errors.modem_delay,
        )
        records.append(EpochRecord(e + 1, pre_offset, clock.offset))

    post = np.array([r.post_offset for r in records])
    logger.info(
        f"Pipeline finished: mean post-correction offset {post.mean() * 1e9:.3f} ns",
        extra={
            "action": "pipeline_completed",
            "epochs": epochs,
            "mean_post_offset_ns": float(post.mean()) * 1e9,
            "max_abs_post_offset_ns": float(np.abs(post).max()) * 1e9,
        },
    )

    return SyncTrace(records, clock)
