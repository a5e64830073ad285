"""Temporal Gaussian random sparse encoding of float samples into binary spike trains.

Each time step ``t`` draws a Gaussian matrix the size of the sample from a
Philox4x64-10 counter-based generator keyed by ``(seed, t)``; normals come from
numpy's Ziggurat ``Generator.normal``. A position spikes when the sample value
is greater than or equal to its Gaussian draw.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import norm

from .tools.tensor_files import read_spike_file, write_spike_file
from .utils.errors import InputError, StructuralError
from .utils.utils import derive_seed


class EncoderConfig(BaseModel):
    """Hyperparameters of the spike encoder.

    The Gaussian mean is always ``(v_th_up + v_th_down) / 2``; ``sigma`` defaults to
    ``(v_th_up - v_th_down) / 2`` so that the two thresholds sit at one standard deviation.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    time_steps: int = Field(ge=1)
    v_th_up: float = 1.0
    v_th_down: float = -1.0
    sigma: Optional[float] = Field(default=None, gt=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_thresholds(self) -> "EncoderConfig":
        if not self.v_th_up > self.v_th_down:
            raise ValueError(f"v_th_up ({self.v_th_up}) must be greater than v_th_down ({self.v_th_down})")
        if self.sigma is None:
            object.__setattr__(self, "sigma", (self.v_th_up - self.v_th_down) / 2.0)
        return self

    @property
    def mean(self) -> float:
        return (self.v_th_up + self.v_th_down) / 2.0


@dataclass(frozen=True)
class SpikeTrain:
    """Binary tensor of shape [T, C, H, W]."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 4:
            raise StructuralError(f"A spike train must have 4 axes [T, C, H, W], got shape {bits.shape}")
        if bits.shape[0] < 1:
            raise StructuralError("A spike train needs at least one time step")
        if bits.dtype != np.bool_:
            if not np.isin(bits, (0, 1)).all():
                raise InputError("Spike trains may only contain 0 and 1")
            bits = bits.astype(np.bool_)
        object.__setattr__(self, "bits", bits)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.bits.shape)

    @property
    def time_steps(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))


def gaussian_draw(cfg: EncoderConfig, time_step: int, shape: Sequence[int]) -> np.ndarray:
    """The Gaussian comparison matrix of one time step."""
    bit_generator = np.random.Philox(key=np.array([cfg.seed, time_step], dtype=np.uint64))
    return np.random.Generator(bit_generator).normal(loc=cfg.mean, scale=cfg.sigma, size=tuple(shape))


def encode(sample: np.ndarray, cfg: EncoderConfig) -> SpikeTrain:
    """Encode a [C, H, W] sample into a [T, C, H, W] spike train.

    Parameters
    ----------
    sample : np.ndarray
        Finite float sample in the same units as the encoder thresholds.
    cfg : EncoderConfig
        Encoder hyperparameters and seed.

    Returns
    -------
    SpikeTrain
        ``train[t, c, h, w] = sample[c, h, w] >= G_t[c, h, w]``.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 3:
        raise InputError(f"Samples must have shape [C, H, W], got {sample.shape}")
    if not np.isfinite(sample).all():
        raise InputError("Samples must be finite; found NaN or infinite values")
    bits = np.empty((cfg.time_steps,) + sample.shape, dtype=np.bool_)
    for t in range(cfg.time_steps):
        bits[t] = sample >= gaussian_draw(cfg, t, sample.shape)
    return SpikeTrain(bits)


def encode_batch(samples: Sequence[np.ndarray], cfg: EncoderConfig, start_index: int = 0) -> list[SpikeTrain]:
    """Encode several samples, each with a seed derived from ``cfg.seed`` and its index.

    ``start_index`` offsets the indices so that a batch split into chunks encodes exactly
    as the whole batch would.
    """
    trains = []
    for index, sample in enumerate(samples, start=start_index):
        sample_cfg = cfg.model_copy(update={"seed": derive_seed(cfg.seed, index)})
        trains.append(encode(sample, sample_cfg))
    return trains


def spike_rate(train: SpikeTrain) -> np.ndarray:
    """Fraction of time steps each position fired, shape [C, H, W]."""
    return train.bits.mean(axis=0)


def expected_rate(x, cfg: EncoderConfig):
    """Analytic spike probability ``Phi((x - mean) / sigma)`` of a value or array."""
    rate = norm.cdf((np.asarray(x, dtype=np.float64) - cfg.mean) / cfg.sigma)
    if np.ndim(rate) == 0:
        return float(rate)
    return rate


def rate_transform(sample: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Map a sample onto the [0, 1] firing-rate scale its spike train converges to."""
    sample = np.asarray(sample, dtype=np.float64)
    if not np.isfinite(sample).all():
        raise InputError("Samples must be finite; found NaN or infinite values")
    return np.asarray(expected_rate(sample, cfg), dtype=np.float64)


def save_spike_train(train: SpikeTrain, file_path: str | Path):
    write_spike_file(file_path, train.bits)


def load_spike_train(file_path: str | Path) -> SpikeTrain:
    return SpikeTrain(read_spike_file(file_path))
