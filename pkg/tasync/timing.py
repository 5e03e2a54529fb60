"""
NR numerology timing constants and timing-advance (TA) conversions.

A TA command advances uplink timing by the round trip, so one TA step of
``t_mu`` corresponds to a one-way time-of-arrival (TOA) slot of
``slot_width = t_mu / 2``. Bin ``i`` covers measured TOA values in
``i * slot_width +/- slot_width / 2``; the base station picks the nearest bin
center, ties going to the lower index.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any

import numpy as np

from tasync.errors import InvalidCommandError, InvalidScenarioError, UnsupportedNumerologyError

logger = logging.getLogger(__name__)

# NR basic time unit: 1 / (delta_f_max * N_f) with delta_f_max = 480 kHz, N_f = 4096
DELTA_F_MAX_HZ = 480e3
N_F = 4096
TC_SECONDS = 1.0 / (DELTA_F_MAX_HZ * N_F)

MAX_SUPPORTED_MU = 3
SUPPORTED_SCS_KHZ = (15, 30, 60, 120)

TA_ABSOLUTE_MAX = 3846
TA_RELATIVE_MAX = 63
TA_RELATIVE_ZERO = 31

SPEED_OF_LIGHT = 299_792_458.0


class Saturation(Enum):
    """Whether a quantized or adjusted value was clamped at a range limit."""

    NONE = "none"
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class Numerology:
    """NR numerology; subcarrier spacing is 15 * 2^mu kHz."""

    mu: int

    def __post_init__(self) -> None:
        if not isinstance(self.mu, int) or isinstance(self.mu, bool) or self.mu < 0:
            raise UnsupportedNumerologyError(self.mu)

    @property
    def scs_khz(self) -> int:
        return 15 * 2**self.mu

    @property
    def supported(self) -> bool:
        return self.mu <= MAX_SUPPORTED_MU

    @classmethod
    def from_scs(cls, scs_khz: int) -> "Numerology":
        """Build the numerology for a supported subcarrier spacing in kHz."""
        if scs_khz not in SUPPORTED_SCS_KHZ:
            raise UnsupportedNumerologyError(scs_khz, unit="scs_khz")
        return cls(SUPPORTED_SCS_KHZ.index(scs_khz))


@dataclass(frozen=True)
class TimingConstants:
    """Closed-form timing units for one numerology, in seconds."""

    t_c: float
    t_mu: float
    slot_width: float


@dataclass(frozen=True)
class TaCommandAbsolute:
    """TA command sent in the random access response (index 0..3846)."""

    index: int
    saturation: Saturation = Saturation.NONE

    def __post_init__(self) -> None:
        if not 0 <= self.index <= TA_ABSOLUTE_MAX:
            raise InvalidCommandError("absolute", self.index, TA_ABSOLUTE_MAX)


@dataclass(frozen=True)
class TaCommandRelative:
    """Connected-mode TA adjustment (index 0..63, 31 means no change)."""

    index: int

    def __post_init__(self) -> None:
        if not 0 <= self.index <= TA_RELATIVE_MAX:
            raise InvalidCommandError("relative", self.index, TA_RELATIVE_MAX)


@dataclass(frozen=True)
class RelativeAdjustment:
    """Uplink advance after a relative TA command."""

    advance: float
    saturation: Saturation = Saturation.NONE


@dataclass(frozen=True)
class QuantizationBounds:
    """Worst-case TOA-from-TA errors for a noiseless measurement."""

    center_error: float  # slot_width / 2, center estimator
    granularity_bound: float  # slot_width, the tabulated TA granularity
    narrow_bound: float  # 8 * 16 * t_c / 2^mu


@dataclass(frozen=True)
class QuantizedArray:
    """Vectorized quantizer output."""

    indices: np.ndarray
    saturated_low: np.ndarray
    saturated_high: np.ndarray

    @property
    def saturation_count(self) -> int:
        return int(np.count_nonzero(self.saturated_low | self.saturated_high))


@lru_cache(maxsize=16)
def timing_constants(n: Numerology) -> TimingConstants:
    """
    Compute t_c, t_mu and the one-way TOA slot width for a numerology.

    Raises:
        UnsupportedNumerologyError: If mu > 3
    """
    if not n.supported:
        raise UnsupportedNumerologyError(n.mu)

    t_mu = 16 * 64 * TC_SECONDS / 2**n.mu
    return TimingConstants(t_c=TC_SECONDS, t_mu=t_mu, slot_width=t_mu / 2)


def _bin_position(toa: float, slot_width: float) -> float:
    return toa / slot_width - 0.5


def quantize_toa(
    toa: float, n: Numerology, max_index: int = TA_ABSOLUTE_MAX
) -> TaCommandAbsolute:
    """
    Map a measured one-way TOA to the absolute TA command of the nearest bin.

    Negative TOA (noise near zero) clamps to index 0 flagged LOW; TOA beyond
    the last bin clamps to ``max_index`` flagged HIGH.
    """
    if not math.isfinite(toa):
        raise InvalidScenarioError(f"TOA must be finite, got {toa}")
    if not 0 <= max_index <= TA_ABSOLUTE_MAX:
        raise InvalidCommandError("absolute", max_index, TA_ABSOLUTE_MAX)

    slot_width = timing_constants(n).slot_width
    raw = math.ceil(_bin_position(toa, slot_width))

    if raw > max_index:
        return TaCommandAbsolute(max_index, Saturation.HIGH)
    if toa < 0:
        return TaCommandAbsolute(max(raw, 0), Saturation.LOW)
    return TaCommandAbsolute(max(raw, 0))


def quantize_toa_array(
    toa: np.ndarray, n: Numerology, max_index: int = TA_ABSOLUTE_MAX
) -> QuantizedArray:
    """Vectorized :func:`quantize_toa` over an array of measured TOA values."""
    if not 0 <= max_index <= TA_ABSOLUTE_MAX:
        raise InvalidCommandError("absolute", max_index, TA_ABSOLUTE_MAX)

    slot_width = timing_constants(n).slot_width
    toa = np.asarray(toa, dtype=np.float64)
    if not np.all(np.isfinite(toa)):
        raise InvalidScenarioError(
            f"TOA must be finite, got {np.count_nonzero(~np.isfinite(toa))} non-finite values"
        )
    raw = np.ceil(_bin_position(toa, slot_width))

    saturated_high = raw > max_index
    saturated_low = toa < 0
    indices = np.clip(raw, 0, max_index).astype(np.int64)
    return QuantizedArray(indices, saturated_low, saturated_high)


def ta_to_toa_estimate(ta: TaCommandAbsolute, n: Numerology) -> float:
    """Center of the TA bin in one-way TOA space."""
    return ta.index * timing_constants(n).slot_width


def initial_advance(ta: TaCommandAbsolute, n: Numerology) -> float:
    """Uplink advance (round trip) signalled by an absolute TA command."""
    return ta.index * timing_constants(n).t_mu


def apply_relative_ta(
    current_advance: float, cmd: TaCommandRelative, n: Numerology
) -> RelativeAdjustment:
    """
    Adjust the current uplink advance by ``(index - 31) * t_mu``.

    The result never goes below zero; a clamp is flagged LOW.
    """
    if current_advance < 0:
        raise InvalidScenarioError(f"current advance must be >= 0, got {current_advance}")

    advance = current_advance + (cmd.index - TA_RELATIVE_ZERO) * timing_constants(n).t_mu
    if advance < 0:
        logger.debug(
            "Relative TA clamped at zero advance",
            extra={
                "action": "relative_ta_saturated",
                "current_advance": current_advance,
                "index": cmd.index,
            },
        )
        return RelativeAdjustment(0.0, Saturation.LOW)
    return RelativeAdjustment(advance)


def max_quantization_error(n: Numerology) -> float:
    """
    Worst-case center-estimator error for a noiseless TOA (slot_width / 2).

    The looser bound quoted with the TA granularity (one full slot width) is
    ``quantization_bounds(n).granularity_bound``.
    """
    return timing_constants(n).slot_width / 2


def quantization_bounds(n: Numerology) -> QuantizationBounds:
    """All three bounds quoted for TA granularity."""
    constants = timing_constants(n)
    return QuantizationBounds(
        center_error=constants.slot_width / 2,
        granularity_bound=constants.slot_width,
        narrow_bound=8 * 16 * constants.t_c / 2**n.mu,
    )


def propagation_delay(distance_m: float) -> float:
    """One-way free-space propagation delay for a device at ``distance_m``."""
    if distance_m < 0:
        raise InvalidScenarioError(f"distance must be >= 0, got {distance_m}")
    return distance_m / SPEED_OF_LIGHT


def constants_table() -> list[dict[str, Any]]:
    """Timing constants for every supported subcarrier spacing."""
    rows = []
    for scs in SUPPORTED_SCS_KHZ:
        n = Numerology.from_scs(scs)
        constants = timing_constants(n)
        rows.append(
            {
                "scs_khz": scs,
                "mu": n.mu,
                "t_c": constants.t_c,
                "t_mu": constants.t_mu,
                "slot_width": constants.slot_width,
                "max_quantization_error": max_quantization_error(n),
            }
        )
    return rows
