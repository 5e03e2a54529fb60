"""
Seeded Monte Carlo engine for TOA-from-TA estimation error.

Each trial draws a true TOA from the scenario prior, takes K independent
perturbed measurements of it, quantizes each to a TA bin, averages the bin
centers and records ``|estimate - true TOA|``.

Trials are processed in fixed blocks of ``TRIAL_BLOCK``. Within block ``b``
every draw family has its own substream (see :func:`tasync.channel.substream_id`):

- lane 0: prior uniform of each trial
- lane 1 + 2k: detection uniform of measurement k
- lane 2 + 2k: Gaussian of measurement k

so results depend only on the scenario, never on worker count, and
measurement k of a trial is shared by every averaging window K > k.
"""

import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from tasync.channel import ErrorModel, RandomStream, apply_error_model, substream_id
from tasync.errors import InvalidScenarioError, SampleLimitError
from tasync.timing import (
    TA_ABSOLUTE_MAX,
    Numerology,
    TaCommandAbsolute,
    quantize_toa_array,
    timing_constants,
)
from utils.metrics import gauge, increment, timer

logger = logging.getLogger(__name__)

TRIAL_BLOCK = 4096
PRIOR_LANE = 0
QUANTILE_LEVELS = (0.5, 0.9, 0.99, 0.999)
DEFAULT_MAX_RETAINED_SAMPLES = 10_000_000


def detection_lane(k: int) -> int:
    return 1 + 2 * k


def noise_lane(k: int) -> int:
    return 2 + 2 * k


# TOA priors


@dataclass(frozen=True)
class UniformInSlot:
    """True TOA uniform in bin ``center_index``: t_i +/- T/2."""

    center_index: int

    def validate(self) -> None:
        if not 1 <= self.center_index <= TA_ABSOLUTE_MAX:
            raise InvalidScenarioError(
                f"center_index must be in [1, {TA_ABSOLUTE_MAX}], got {self.center_index}"
            )


@dataclass(frozen=True)
class UniformInRange:
    """True TOA uniform in [lo, hi] seconds."""

    lo: float
    hi: float

    def validate(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidScenarioError("TOA range bounds must be finite")
        if not 0 <= self.lo <= self.hi:
            raise InvalidScenarioError(
                f"TOA range must satisfy 0 <= lo <= hi, got [{self.lo}, {self.hi}]"
            )


@dataclass(frozen=True)
class FixedToa:
    """True TOA fixed at ``toa`` seconds."""

    toa: float

    def validate(self) -> None:
        if not (math.isfinite(self.toa) and self.toa >= 0):
            raise InvalidScenarioError(f"fixed TOA must be finite and >= 0, got {self.toa}")


ToaPrior = UniformInSlot | UniformInRange | FixedToa


def draw_true_toa(prior: ToaPrior, n: Numerology, u: np.ndarray) -> np.ndarray:
    """Map prior-lane uniforms in (0, 1) to true TOA values."""
    if isinstance(prior, UniformInSlot):
        slot_width = timing_constants(n).slot_width
        return (prior.center_index + (u - 0.5)) * slot_width
    if isinstance(prior, UniformInRange):
        return prior.lo + u * (prior.hi - prior.lo)
    return np.full_like(u, prior.toa)


# Scenario and results


@dataclass(frozen=True)
class Scenario:
    """Everything a run depends on; equal scenarios give identical results."""

    numerology: Numerology
    toa_prior: ToaPrior
    error_model: ErrorModel
    trials: int
    avg_window: int = 1
    seed: int = 42
    confidence: float = 0.999
    bias_correction: float = 0.0  # subtracted from each measured TOA before quantization

    def __post_init__(self) -> None:
        if not self.numerology.supported:
            raise InvalidScenarioError(f"unsupported numerology mu={self.numerology.mu}")
        if self.trials < 1:
            raise InvalidScenarioError(f"trials must be >= 1, got {self.trials}")
        if self.avg_window < 1:
            raise InvalidScenarioError(f"avg_window must be >= 1, got {self.avg_window}")
        if not 0 <= self.seed < 2**64:
            raise InvalidScenarioError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0.0 < self.confidence <= 1.0:
            raise InvalidScenarioError(f"confidence must be in (0, 1], got {self.confidence}")
        if not math.isfinite(self.bias_correction):
            raise InvalidScenarioError("bias_correction must be finite")
        self.toa_prior.validate()

    @property
    def block_count(self) -> int:
        return -(-self.trials // TRIAL_BLOCK)

    def with_window(self, avg_window: int) -> "Scenario":
        return replace(self, avg_window=avg_window)


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous step CDF F(x) = #{s <= x} / n over sorted samples."""

    sorted_samples: np.ndarray

    @property
    def n(self) -> int:
        return int(self.sorted_samples.size)

    def evaluate(self, x: float | np.ndarray) -> float | np.ndarray:
        counts = np.searchsorted(self.sorted_samples, x, side="right")
        if np.ndim(counts) == 0:
            return int(counts) / self.n
        return counts / self.n

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct sample values and the CDF at each of them."""
        values, counts = np.unique(self.sorted_samples, return_counts=True)
        return values, np.cumsum(counts) / self.n


@dataclass(frozen=True)
class SimSummary:
    """Sample-free digest of a run; what the budget consumes."""

    scs_khz: int
    trials: int
    avg_window: int
    seed: int
    confidence: float
    p_e: float
    mean_abs_error: float
    mean_signed_error: float
    max_error: float
    quantiles: dict[float, float]
    saturation_count: int

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form with times in nanoseconds."""
        return {
            "scs_khz": self.scs_khz,
            "trials": self.trials,
            "avg_window": self.avg_window,
            "seed": self.seed,
            "confidence": self.confidence,
            "p_e_ns": self.p_e * 1e9,
            "mean_abs_error_ns": self.mean_abs_error * 1e9,
            "mean_signed_error_ns": self.mean_signed_error * 1e9,
            "max_error_ns": self.max_error * 1e9,
            "quantiles": {repr(q): v * 1e9 for q, v in sorted(self.quantiles.items())},
            "saturation_count": self.saturation_count,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimSummary":
        try:
            return cls(
                scs_khz=int(data["scs_khz"]),
                trials=int(data.get("trials", 0)),
                avg_window=int(data.get("avg_window", 1)),
                seed=int(data.get("seed", 0)),
                confidence=float(data.get("confidence", 0.0)),
                p_e=float(data["p_e_ns"]) * 1e-9,
                mean_abs_error=float(data.get("mean_abs_error_ns", 0.0)) * 1e-9,
                mean_signed_error=float(data.get("mean_signed_error_ns", 0.0)) * 1e-9,
                max_error=float(data.get("max_error_ns", 0.0)) * 1e-9,
                quantiles={
                    float(q): float(v) * 1e-9 for q, v in data.get("quantiles", {}).items()
                },
                saturation_count=int(data.get("saturation_count", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidScenarioError(f"Malformed simulation summary: {e}") from e


@dataclass(frozen=True, eq=False)
class SimResult:
    """Error samples of one run and the statistics derived from them."""

    scenario: Scenario
    cdf: EmpiricalCdf
    p_e: float
    mean_abs_error: float
    mean_signed_error: float
    quantiles: dict[float, float]
    saturation_count: int
    signed_errors: np.ndarray | None = field(default=None, compare=False)

    @property
    def max_error(self) -> float:
        return float(self.cdf.sorted_samples[-1])

    def summary(self) -> SimSummary:
        return SimSummary(
            scs_khz=self.scenario.numerology.scs_khz,
            trials=self.scenario.trials,
            avg_window=self.scenario.avg_window,
            seed=self.scenario.seed,
            confidence=self.scenario.confidence,
            p_e=self.p_e,
            mean_abs_error=self.mean_abs_error,
            mean_signed_error=self.mean_signed_error,
            max_error=self.max_error,
            quantiles=dict(self.quantiles),
            saturation_count=self.saturation_count,
        )


# Statistics


def empirical_cdf(samples: Iterable[float] | np.ndarray) -> EmpiricalCdf:
    """Sorted copy of ``samples`` wrapped as a step CDF."""
    if not isinstance(samples, np.ndarray):
        samples = list(samples)
    values = np.sort(np.asarray(samples, dtype=np.float64))
    if values.size == 0:
        raise InvalidScenarioError("empirical CDF needs at least one sample")
    if np.isnan(values).any():
        raise InvalidScenarioError("empirical CDF samples must not contain NaN")
    return EmpiricalCdf(values)


def quantile(cdf: EmpiricalCdf, q: float) -> float:
    """Inverse CDF with lower interpolation: sorted_samples[ceil(q * n) - 1]."""
    if not 0.0 < q <= 1.0:
        raise InvalidScenarioError(f"quantile level must be in (0, 1], got {q}")
    # q * n can land an ulp above an integer (0.999 * 10**6)
    rank = max(1, math.ceil(round(q * cdf.n, 6)))
    return float(cdf.sorted_samples[min(rank, cdf.n) - 1])


# Quantize-and-average kernel


def average_ta(commands: Sequence[TaCommandAbsolute], n: Numerology) -> float:
    """Mean of the bin-center TOA estimates of ``commands``."""
    if not commands:
        raise InvalidScenarioError("average_ta needs at least one TA command")
    index_sum = sum(cmd.index for cmd in commands)
    return index_sum / len(commands) * timing_constants(n).slot_width


def estimate_from_measurements(
    measured: np.ndarray, n: Numerology, max_index: int = TA_ABSOLUTE_MAX
) -> tuple[np.ndarray, int]:
    """
    Quantize a (trials, K) array of measured TOA and average each row.

    Returns:
        Per-trial TOA estimates and the number of saturated measurements
    """
    measured = np.atleast_2d(np.asarray(measured, dtype=np.float64))
    quantized = quantize_toa_array(measured, n, max_index)
    index_sum = quantized.indices.sum(axis=1)
    estimates = index_sum / measured.shape[1] * timing_constants(n).slot_width
    return estimates, quantized.saturation_count


@dataclass(frozen=True, eq=False)
class TrialEstimates:
    """Per-trial true TOA and TA-derived estimate, in trial order."""

    true_toa: np.ndarray
    estimates: np.ndarray
    saturation_count: int

    @property
    def signed_errors(self) -> np.ndarray:
        return self.estimates - self.true_toa


def _simulate_block(scenario: Scenario, block: int) -> TrialEstimates:
    """True TOA, estimates and saturation count for one trial block."""
    start = block * TRIAL_BLOCK
    count = min(TRIAL_BLOCK, scenario.trials - start)
    seed = scenario.seed

    prior_u = RandomStream(seed, substream_id(block, PRIOR_LANE)).uniform(count)
    true_toa = draw_true_toa(scenario.toa_prior, scenario.numerology, prior_u)

    measured = np.empty((count, scenario.avg_window), dtype=np.float64)
    for k in range(scenario.avg_window):
        detect_u = RandomStream(seed, substream_id(block, detection_lane(k))).uniform(count)
        z = RandomStream(seed, substream_id(block, noise_lane(k))).standard_normal(count)
        measured[:, k] = true_toa + apply_error_model(scenario.error_model, detect_u, z)

    if scenario.bias_correction:
        measured -= scenario.bias_correction

    estimates, saturated = estimate_from_measurements(measured, scenario.numerology)
    return TrialEstimates(true_toa, estimates, saturated)


def _simulate_blocks(args: tuple[Scenario, int, int]) -> TrialEstimates:
    """Worker entry point: contiguous blocks [first, last)."""
    scenario, first, last = args
    parts = [_simulate_block(scenario, block) for block in range(first, last)]
    return _concatenate(parts)


def _concatenate(parts: Sequence[TrialEstimates]) -> TrialEstimates:
    return TrialEstimates(
        true_toa=np.concatenate([p.true_toa for p in parts]),
        estimates=np.concatenate([p.estimates for p in parts]),
        saturation_count=sum(p.saturation_count for p in parts),
    )


def _block_ranges(block_count: int, workers: int) -> list[tuple[int, int]]:
    chunks = min(block_count, workers * 4)
    bounds = np.linspace(0, block_count, chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:], strict=True) if b > a]


def simulate_estimates(scenario: Scenario, workers: int = 1) -> TrialEstimates:
    """
    Run every trial of ``scenario`` and return raw per-trial values.

    Work is split into contiguous block ranges; with ``workers > 1`` they run in
    a process pool and are merged back in block order.
    """
    if workers < 1:
        raise InvalidScenarioError(f"workers must be >= 1, got {workers}")
    ranges = _block_ranges(scenario.block_count, workers)
    jobs = [(scenario, first, last) for first, last in ranges]

    if workers <= 1 or len(jobs) == 1:
        outputs = [_simulate_blocks(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outputs = list(executor.map(_simulate_blocks, jobs))

    return _concatenate(outputs)


def run_scenario(
    s: Scenario,
    workers: int = 1,
    max_retained_samples: int = DEFAULT_MAX_RETAINED_SAMPLES,
    retain_signed: bool = False,
) -> SimResult:
    """
    Run every trial of ``s`` and summarize the absolute error distribution.

    Raises:
        SampleLimitError: If ``s.trials`` exceeds ``max_retained_samples``
    """
    if s.trials > max_retained_samples:
        raise SampleLimitError(s.trials, max_retained_samples)

    tags = {"scs_khz": str(s.numerology.scs_khz)}
    logger.info(
        f"Running scenario: {s.trials} trials at {s.numerology.scs_khz} kHz, K={s.avg_window}",
        extra={
            "action": "scenario_started",
            "scs_khz": s.numerology.scs_khz,
            "trials": s.trials,
            "avg_window": s.avg_window,
            "blocks": s.block_count,
            "workers": workers,
            "seed": s.seed,
        },
    )

    with timer("scenario", tags=tags) as scenario_timer:
        outcome = simulate_estimates(s, workers)
        signed = outcome.signed_errors
        saturated = outcome.saturation_count
        absolute = np.abs(signed)
        cdf = empirical_cdf(absolute)

        levels = sorted(set(QUANTILE_LEVELS) | {s.confidence})
        quantiles = {q: quantile(cdf, q) for q in levels}

        result = SimResult(
            scenario=s,
            cdf=cdf,
            p_e=quantiles[s.confidence],
            mean_abs_error=float(absolute.mean()),
            mean_signed_error=float(signed.mean()),
            quantiles=quantiles,
            saturation_count=saturated,
            signed_errors=signed if retain_signed else None,
        )

    duration = scenario_timer.duration or 0.0
    increment("trials_total", float(s.trials), tags=tags)
    increment("ta_saturation_total", float(saturated), tags=tags)
    gauge("scenario_last_p_e_ns", result.p_e * 1e9, tags=tags)

    if saturated:
        logger.warning(
            f"{saturated} measurements clamped at the TA range limits",
            extra={"action": "ta_saturation_observed", "saturation_count": saturated},
        )

    logger.info(
        f"Scenario completed in {duration:.3f}s: P_e={result.p_e * 1e9:.3f} ns",
        extra={
            "action": "scenario_completed",
            "duration": duration,
            "p_e_ns": result.p_e * 1e9,
            "mean_abs_error_ns": result.mean_abs_error * 1e9,
            "saturation_count": saturated,
        },
    )

    return result


def sweep_avg_windows(
    base: Scenario,
    windows: Sequence[int],
    workers: int = 1,
    max_retained_samples: int = DEFAULT_MAX_RETAINED_SAMPLES,
) -> list[tuple[int, SimResult]]:
    """Run ``base`` once per averaging window K, sharing prior and measurement draws."""
    if not windows:
        raise InvalidScenarioError("windows must not be empty")
    for k in windows:
        if k < 1:
            raise InvalidScenarioError(f"averaging window must be >= 1, got {k}")

    return [
        (k, run_scenario(base.with_window(k), workers, max_retained_samples)) for k in windows
    ]


def select_avg_window(
    base: Scenario,
    windows: Sequence[int],
    target: float,
    workers: int = 1,
    max_retained_samples: int = DEFAULT_MAX_RETAINED_SAMPLES,
) -> tuple[int, SimResult] | None:
    """Smallest K in ``windows`` whose P_e is at most ``target`` seconds, or None."""
    for k, result in sweep_avg_windows(base, sorted(windows), workers, max_retained_samples):
        if result.p_e <= target:
            logger.info(
                f"Averaging window K={k} meets target {target * 1e9:.1f} ns",
                extra={"action": "avg_window_selected", "avg_window": k, "p_e_ns": result.p_e * 1e9},
            )
            return k, result
    return None
