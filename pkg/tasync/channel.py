"""
Stochastic TOA perturbation models and seeded random streams.

Gaussian draws use the inverse normal CDF (``scipy.special.ndtri``) applied to
Philox uniforms, so a given ``(seed, stream_id)`` yields the same bits on every
platform and under any worker layout. Every error draw consumes exactly one
detection uniform and one Gaussian, whatever the model, so LOS and NLOS runs
stay aligned draw for draw.
"""

import logging
from dataclasses import dataclass
from typing import overload

import numpy as np
from scipy.special import ndtri

from tasync.errors import InvalidScenarioError
from tasync.timing import Numerology, timing_constants

logger = logging.getLogger(__name__)

_UINT64_LIMIT = 2**64
_BLOCK_BITS = 40
_LANE_LIMIT = 2**23
_MANTISSA_SHIFT = np.uint64(12)
_GRID = 2.0**-52


def raw_to_unit(raw: np.ndarray | int) -> np.ndarray:
    """Map raw 64-bit words to midpoints of the 2^-52 grid, strictly inside (0, 1)."""
    return ((np.asarray(raw, dtype=np.uint64) >> _MANTISSA_SHIFT) + 0.5) * _GRID


@dataclass(frozen=True)
class LosGaussianModel:
    """Zero-mean Gaussian TOA measurement error."""

    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma >= 0:
            raise InvalidScenarioError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def relative(cls, sigma_rel: float, n: Numerology) -> "LosGaussianModel":
        """Sigma expressed as a multiple of the TOA slot width T."""
        return cls(sigma_rel * timing_constants(n).slot_width)

    @property
    def expected_bias(self) -> float:
        return 0.0


@dataclass(frozen=True)
class NlosModel:
    """
    Two-state NLOS error: with probability ``p_detect`` the attenuated direct
    path is found and the error is N(0, sigma_detected^2); otherwise the first
    non-direct path is taken and the error is bias_bp + N(0, sigma_blocked^2).
    """

    sigma_detected: float
    sigma_blocked: float
    bias_bp: float
    p_detect: float

    def __post_init__(self) -> None:
        if not self.sigma_detected >= 0 or not self.sigma_blocked >= 0:
            raise InvalidScenarioError("NLOS sigmas must be >= 0")
        if not self.bias_bp >= 0:
            raise InvalidScenarioError(f"bias_bp must be >= 0, got {self.bias_bp}")
        if not 0.0 <= self.p_detect <= 1.0:
            raise InvalidScenarioError(f"p_detect must be in [0, 1], got {self.p_detect}")

    @property
    def expected_bias(self) -> float:
        return (1.0 - self.p_detect) * self.bias_bp


ErrorModel = LosGaussianModel | NlosModel


def substream_id(block: int, lane: int) -> int:
    """Pack a trial block and a draw lane into one 64-bit stream id."""
    if not 0 <= block < 2**_BLOCK_BITS:
        raise InvalidScenarioError(f"trial block {block} out of range")
    if not 0 <= lane < _LANE_LIMIT:
        raise InvalidScenarioError(f"lane {lane} out of range")
    return (lane << _BLOCK_BITS) | block


class RandomStream:
    """
    Single-owner source of reproducible uniforms and Gaussians.

    The Philox key comes from ``SeedSequence(seed, spawn_key=(stream_id,))``;
    distinct stream ids give statistically independent substreams.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= seed < _UINT64_LIMIT:
            raise InvalidScenarioError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if not 0 <= stream_id < _UINT64_LIMIT:
            raise InvalidScenarioError(
                f"stream_id must be a 64-bit unsigned integer, got {stream_id}"
            )
        self.seed = seed
        self.stream_id = stream_id
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id,))
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    @overload
    def uniform(self, size: None = None) -> float: ...

    @overload
    def uniform(self, size: int | tuple[int, ...]) -> np.ndarray: ...

    def uniform(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
        """Uniforms on the open interval (0, 1), midpoints of the 2^-52 grid."""
        draws = raw_to_unit(self._generator.bit_generator.random_raw(1 if size is None else size))
        if size is None:
            return float(draws[0])
        return draws

    @overload
    def standard_normal(self, size: None = None) -> float: ...

    @overload
    def standard_normal(self, size: int | tuple[int, ...]) -> np.ndarray: ...

    def standard_normal(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
        """N(0, 1) draws by inverse CDF, one uniform per draw."""
        draws = ndtri(self.uniform(size))
        if size is None:
            return float(draws)
        return draws


@overload
def apply_error_model(model: ErrorModel, detect_u: float, z: float) -> float: ...


@overload
def apply_error_model(model: ErrorModel, detect_u: np.ndarray, z: np.ndarray) -> np.ndarray: ...


def apply_error_model(
    model: ErrorModel, detect_u: float | np.ndarray, z: float | np.ndarray
) -> float | np.ndarray:
    """Turn a detection uniform and a standard normal into a TOA error (seconds)."""
    if isinstance(model, LosGaussianModel):
        return model.sigma * z

    detected = np.less(detect_u, model.p_detect)
    error = np.where(
        detected,
        model.sigma_detected * z,
        model.bias_bp + model.sigma_blocked * z,
    )
    if np.ndim(error) == 0:
        return float(error)
    return error


@overload
def sample_error(model: ErrorModel, rng: RandomStream, size: None = None) -> float: ...


@overload
def sample_error(model: ErrorModel, rng: RandomStream, size: int) -> np.ndarray: ...


def sample_error(
    model: ErrorModel, rng: RandomStream, size: int | None = None
) -> float | np.ndarray:
    """Draw TOA measurement error(s) from ``model``."""
    detect_u = rng.uniform(size)
    z = rng.standard_normal(size)
    return apply_error_model(model, detect_u, z)


def perturb_toa(true_toa: float, model: ErrorModel, rng: RandomStream) -> float:
    """Measured TOA: true TOA plus one model error; may come out negative."""
    if true_toa < 0:
        raise InvalidScenarioError(f"true TOA must be >= 0, got {true_toa}")
    return true_toa + sample_error(model, rng)
