"""Time-stepped inference over a spiking CNN of integrate-and-fire neurons.

Every arithmetic step on the spiking path is an accumulation or a comparison: weighted
inputs are sums of the weights selected by 1-bits, never products.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from .cnn_reference import (
    Conv1D,
    FullyConnected,
    MaxPool1D,
    NetworkSpec,
    Orientation,
    WeightContainer,
    axis_last,
    conv_mac_count,
    conv_windows,
)
from .instrumentation import OpCounter
from .spike_encoder import SpikeTrain
from .utils.errors import InputError, StructuralError
from .utils.utils import Label

logger = logging.getLogger(__name__)


class ResetMode(str, Enum):
    TO_REST = "to_rest"
    SUBTRACT_THRESHOLD = "subtract_threshold"


class PoolMode(str, Enum):
    OR = "or"
    RATE_MAX = "rate_max"


RESET_CODES = {ResetMode.TO_REST: 0, ResetMode.SUBTRACT_THRESHOLD: 1}


class IfConfig(BaseModel):
    """Integrate-and-fire parameters of one layer."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    v_th: float = Field(default=1.0, gt=0.0)
    v_rest: float = 0.0
    leak: float = Field(default=0.0, ge=0.0)
    reset_mode: ResetMode = ResetMode.TO_REST

    @model_validator(mode="after")
    def _threshold_above_rest(self) -> "IfConfig":
        if not self.v_th > self.v_rest:
            raise ValueError(f"v_th ({self.v_th}) must be greater than v_rest ({self.v_rest})")
        return self

    @property
    def reset_code(self) -> int:
        return RESET_CODES[self.reset_mode]

    @classmethod
    def from_code(cls, v_th: float, v_rest: float, leak: float, reset_code: int) -> "IfConfig":
        modes = {code: mode for mode, code in RESET_CODES.items()}
        if reset_code not in modes:
            raise InputError(f"Unknown reset mode code {reset_code}")
        return cls(v_th=v_th, v_rest=v_rest, leak=leak, reset_mode=modes[reset_code])


@dataclass
class MembraneState:
    """Membrane potentials of one layer, shaped like its output."""

    potentials: np.ndarray

    @classmethod
    def at_rest(cls, shape: Sequence[int], cfg: IfConfig) -> "MembraneState":
        return cls(np.full(tuple(shape), cfg.v_rest, dtype=np.float64))


@dataclass(frozen=True)
class SpikeCounts:
    """Firing counts of the output neurons over a whole spike train."""

    counts: np.ndarray
    time_steps: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise StructuralError(f"Spike counts must be a vector, got shape {counts.shape}")
        if (counts < 0).any() or (counts > self.time_steps).any():
            raise InputError(f"Spike counts must lie in [0, {self.time_steps}], got {counts.tolist()}")
        object.__setattr__(self, "counts", counts)

    def _class_count(self, label: Label) -> int:
        if len(self.counts) != 2:
            raise StructuralError(f"Two-class counts expected, got {len(self.counts)} output neurons")
        return int(self.counts[label])

    @property
    def preictal(self) -> int:
        return self._class_count(Label.PREICTAL)

    @property
    def interictal(self) -> int:
        return self._class_count(Label.INTERICTAL)


def if_step(
    state: MembraneState, weighted_input: np.ndarray, cfg: IfConfig, counter: Optional[OpCounter] = None
) -> tuple[MembraneState, np.ndarray]:
    """Integrate one step of weighted input, fire where the threshold is reached and reset.

    The leak pulls the potential towards ``v_rest`` but never below it.
    """
    weighted_input = np.asarray(weighted_input, dtype=np.float64)
    if weighted_input.shape != state.potentials.shape:
        raise StructuralError(
            f"Weighted input of shape {weighted_input.shape} does not match membrane shape {state.potentials.shape}"
        )
    potentials = state.potentials + weighted_input
    if cfg.leak > 0:
        potentials = np.where(
            potentials > cfg.v_rest, np.maximum(potentials - cfg.leak, cfg.v_rest), potentials
        )
    spikes = potentials >= cfg.v_th
    if cfg.reset_mode is ResetMode.TO_REST:
        potentials = np.where(spikes, cfg.v_rest, potentials)
    else:
        potentials = np.where(spikes, potentials - cfg.v_th, potentials)
    if counter is not None:
        # accumulate and compare, plus the leak subtraction
        counter.record(adds=potentials.size * (3 if cfg.leak > 0 else 2))
    return MembraneState(potentials), spikes


def _as_bits(spikes: np.ndarray, sample_ndim: int) -> tuple[np.ndarray, bool]:
    spikes = np.asarray(spikes)
    if spikes.dtype != np.bool_:
        if not np.isin(spikes, (0, 1)).all():
            raise InputError("Spike tensors may only contain 0 and 1")
        spikes = spikes.astype(np.bool_)
    if spikes.ndim == sample_ndim:
        return spikes[np.newaxis], True
    if spikes.ndim != sample_ndim + 1:
        raise StructuralError(f"Expected {sample_ndim} or {sample_ndim + 1} axes, got shape {spikes.shape}")
    return spikes, False


def spiking_conv1d(
    spikes_in: np.ndarray,
    layer: Conv1D,
    weight: np.ndarray,
    bias: np.ndarray,
    counter: Optional[OpCounter] = None,
) -> np.ndarray:
    """Weighted input of a convolution over binary inputs, by accumulation only.

    Each output is the bias plus the sum of the kernel taps whose input bit is 1,
    accumulated in the same order as ``conv1d_forward`` so the two agree exactly.
    """
    x, single = _as_bits(spikes_in, 3)
    xs, m = conv_windows(layer, x)
    kernel = np.asarray(weight, dtype=np.float64).reshape(layer.c_out, layer.c_in, layer.kernel_size)
    step = layer.stride
    out = np.zeros((xs.shape[0], layer.c_out, xs.shape[2], m))
    for j in range(layer.kernel_size):
        window = xs[..., j : j + step * (m - 1) + 1 : step]
        out += np.where(window[:, np.newaxis], kernel[np.newaxis, :, :, j, np.newaxis, np.newaxis], 0.0).sum(axis=2)
    out += np.asarray(bias, dtype=np.float64)[np.newaxis, :, np.newaxis, np.newaxis]
    if counter is not None:
        counter.record(adds=x.shape[0] * conv_mac_count(layer, out), per_layer=True)
    out = axis_last(out, layer.axis)
    return out[0] if single else out


def spiking_fc(
    spikes_in: np.ndarray, weight: np.ndarray, bias: np.ndarray, counter: Optional[OpCounter] = None
) -> np.ndarray:
    """Weighted input of a fully connected layer: bias plus the weight columns of active inputs."""
    weight = np.asarray(weight, dtype=np.float64)
    x, single = _as_bits(spikes_in, 1)
    if weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise StructuralError(f"Fully connected weights {weight.shape} do not accept inputs of size {x.shape[1]}")
    out = np.where(x[:, np.newaxis, :], weight[np.newaxis], 0.0).sum(axis=-1) + np.asarray(bias, dtype=np.float64)
    if counter is not None:
        counter.record(adds=out.size * weight.shape[1], per_layer=True)
    return out[0] if single else out


def _pool_blocks(x: np.ndarray, window: int, orientation: Orientation) -> np.ndarray:
    if window < 1:
        raise StructuralError(f"Pooling window must be at least 1, got {window}")
    xs = axis_last(x, orientation)
    n = xs.shape[-1] // window
    if n == 0:
        raise StructuralError(f"Pooling window {window} exceeds the input extent {xs.shape[-1]}")
    return xs[..., : n * window].reshape(xs.shape[:-1] + (n, window))


def spiking_maxpool(
    spikes_in: np.ndarray, window: int, orientation: Orientation = "width", counter: Optional[OpCounter] = None
) -> np.ndarray:
    """OR pooling: an output spikes when any input of its window spikes."""
    x, single = _as_bits(spikes_in, 3)
    out = _pool_blocks(x, window, orientation).any(axis=-1)
    if counter is not None:
        counter.record(adds=out.size * (window - 1))
    out = axis_last(out, orientation)
    return out[0] if single else out


def spiking_rate_max_pool(
    spikes_in: np.ndarray,
    running_counts: np.ndarray,
    window: int,
    orientation: Orientation = "width",
    counter: Optional[OpCounter] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Rate-gated pooling: each window forwards the spike of its most active input so far.

    ``running_counts`` holds the spike counts of the inputs up to the previous step and is
    returned updated with this step. Ties go to the first input of the window.
    """
    x, single = _as_bits(spikes_in, 3)
    counts = np.asarray(running_counts, dtype=np.int64)
    if single:
        counts = counts[np.newaxis]
    if counts.shape != x.shape:
        raise StructuralError(f"Running counts {counts.shape} do not match the pooled input {x.shape}")
    counts = counts + x
    selected = _pool_blocks(counts, window, orientation).argmax(axis=-1)[..., np.newaxis]
    out = np.take_along_axis(_pool_blocks(x, window, orientation), selected, axis=-1)[..., 0]
    if counter is not None:
        counter.record(adds=x.size + out.size * (window - 1))
    out = axis_last(out, orientation)
    return (out[0], counts[0]) if single else (out, counts)


@dataclass
class NetworkRun:
    """Output counts of a batch of trains, with optional per-layer statistics.

    Per-layer lists are indexed by weighted-layer ordinal and hold one value per neuron, batch
    first. ``peak_inputs`` is the largest weighted input of any single step; ``mean_inputs``
    averages it over time.
    """

    counts: np.ndarray
    time_steps: int
    mean_inputs: list[np.ndarray] = field(default_factory=list)
    peak_inputs: list[np.ndarray] = field(default_factory=list)
    rates: list[np.ndarray] = field(default_factory=list)

    def spike_counts(self) -> list[SpikeCounts]:
        return [SpikeCounts(row, self.time_steps) for row in self.counts]


def _layer_configs(if_cfgs: IfConfig | Sequence[IfConfig], n_layers: int) -> list[IfConfig]:
    if isinstance(if_cfgs, IfConfig):
        return [if_cfgs] * n_layers
    if_cfgs = list(if_cfgs)
    if len(if_cfgs) != n_layers:
        raise StructuralError(f"{n_layers} weighted layers but {len(if_cfgs)} IF configurations")
    return if_cfgs


def _stack_trains(trains: Sequence[SpikeTrain] | np.ndarray) -> np.ndarray:
    if isinstance(trains, np.ndarray):
        bits = trains.astype(np.bool_, copy=False)
    else:
        shapes = {train.shape for train in trains}
        if len(shapes) > 1:
            raise StructuralError(f"Spike trains of one batch must share a shape, got {sorted(shapes)}")
        bits = np.stack([train.bits for train in trains])
    if bits.ndim != 5 or len(bits) == 0:
        raise StructuralError(f"Expected a non-empty [B, T, C, H, W] batch, got shape {bits.shape}")
    return bits


def run_network_batch(
    spec: NetworkSpec,
    weights: WeightContainer,
    trains: Sequence[SpikeTrain] | np.ndarray,
    if_cfgs: IfConfig | Sequence[IfConfig],
    pool_mode: PoolMode | str = PoolMode.OR,
    counter: Optional[OpCounter] = None,
    record: bool = False,
) -> NetworkRun:
    """Propagate a batch of spike trains through the spiking network step by step.

    Parameters
    ----------
    spec : NetworkSpec
        Spiking topology (no Relu entries); every weighted layer is followed by IF neurons.
    weights : WeightContainer
        Weights keyed by weighted-layer ordinal.
    trains : Sequence[SpikeTrain] | np.ndarray
        Trains of equal shape, or a [B, T, C, H, W] binary array.
    if_cfgs : IfConfig | Sequence[IfConfig]
        One configuration per weighted layer, or one shared by all.
    pool_mode : PoolMode | str, default: "or"
        OR pooling or rate-gated max pooling.
    counter : OpCounter, optional
        Receives the additions of the run; the spiking path records no multiplications.
    record : bool, default: False
        Also return per-layer mean and peak weighted inputs and firing rates.
    """
    if any(not isinstance(layer, (Conv1D, FullyConnected, MaxPool1D)) for layer in spec.layers):
        raise StructuralError("Spiking networks may not contain explicit activation layers; use the spiking variant")
    weights.check_shapes(spec)
    pool_mode = PoolMode(pool_mode)
    bits = _stack_trains(trains)
    batch, time_steps = bits.shape[:2]
    if bits.shape[2:] != tuple(spec.input_shape):
        raise StructuralError(f"Network expects inputs of shape {spec.input_shape}, got {bits.shape[2:]}")
    cfgs = _layer_configs(if_cfgs, len(spec.weighted_layers))

    shapes = spec.input_shapes()
    ordinals, ordinal = [], 0
    for layer in spec.layers:
        ordinals.append(ordinal if isinstance(layer, (Conv1D, FullyConnected)) else None)
        ordinal += isinstance(layer, (Conv1D, FullyConnected))
    states = {
        k: MembraneState.at_rest((batch,) + shape, cfgs[k])
        for k, shape in zip(ordinals, spec.output_shapes())
        if k is not None
    }
    pool_counts = {
        index: np.zeros((batch,) + shapes[index], dtype=np.int64)
        for index, layer in enumerate(spec.layers)
        if isinstance(layer, MaxPool1D) and pool_mode is PoolMode.RATE_MAX
    }
    input_sums = {k: np.zeros_like(state.potentials) for k, state in states.items()}
    input_peaks = {k: np.full_like(state.potentials, -np.inf) for k, state in states.items()}
    fire_sums = {k: np.zeros(state.potentials.shape, dtype=np.int64) for k, state in states.items()}

    counter = counter if counter is not None else OpCounter()
    for t in range(time_steps):
        x = bits[:, t]
        for index, (layer, k) in enumerate(zip(spec.layers, ordinals)):
            with counter.layer(index):
                if isinstance(layer, MaxPool1D):
                    if pool_mode is PoolMode.OR:
                        x = spiking_maxpool(x, layer.window, layer.orientation, counter=counter)
                    else:
                        x, pool_counts[index] = spiking_rate_max_pool(
                            x, pool_counts[index], layer.window, layer.orientation, counter=counter
                        )
                    continue
                if isinstance(layer, Conv1D):
                    weighted = spiking_conv1d(x, layer, *weights.layers[k], counter=counter)
                else:
                    weighted = spiking_fc(x.reshape(batch, -1), *weights.layers[k], counter=counter)
                states[k], x = if_step(states[k], weighted, cfgs[k], counter=counter)
            if record:
                input_sums[k] += weighted
                np.maximum(input_peaks[k], weighted, out=input_peaks[k])
            fire_sums[k] += x
    last = len(spec.weighted_layers) - 1
    counts = fire_sums[last].reshape(batch, -1)
    run = NetworkRun(counts=counts, time_steps=time_steps)
    if record:
        run.mean_inputs = [input_sums[k] / time_steps for k in sorted(input_sums)]
        run.peak_inputs = [input_peaks[k] for k in sorted(input_peaks)]
        run.rates = [fire_sums[k] / time_steps for k in sorted(fire_sums)]
    return run


def run_network(
    spec: NetworkSpec,
    weights: WeightContainer,
    train: SpikeTrain,
    if_cfgs: IfConfig | Sequence[IfConfig],
    pool_mode: PoolMode | str = PoolMode.OR,
    counter: Optional[OpCounter] = None,
) -> SpikeCounts:
    """Count the output spikes of one sample; membranes start at rest."""
    run = run_network_batch(spec, weights, [train], if_cfgs, pool_mode=pool_mode, counter=counter)
    return run.spike_counts()[0]


def run_network_chunked(
    spec: NetworkSpec,
    weights: WeightContainer,
    trains: Sequence[SpikeTrain],
    if_cfgs: IfConfig | Sequence[IfConfig],
    pool_mode: PoolMode | str = PoolMode.OR,
    batch: int = 32,
    verbose: bool = False,
) -> list[SpikeCounts]:
    """``run_network`` over many trains, evaluated ``batch`` at a time."""
    results = []
    starts = range(0, len(trains), batch)
    for start in tqdm(starts, desc="Spiking inference", disable=not verbose):
        run = run_network_batch(spec, weights, trains[start : start + batch], if_cfgs, pool_mode=pool_mode)
        results.extend(run.spike_counts())
    return results


def decide(counts: SpikeCounts, count_threshold: int = 0, inclusive: bool = False) -> Label:
    """Preictal when the preictal count exceeds the interictal count by more than ``count_threshold``.

    With ``inclusive`` a margin equal to the threshold also counts as preictal.
    """
    if count_threshold < 0:
        raise InputError(f"count_threshold must be non-negative, got {count_threshold}")
    margin = counts.preictal - counts.interictal
    fires = margin >= count_threshold if inclusive else margin > count_threshold
    return Label.PREICTAL if fires else Label.INTERICTAL


def score(counts: SpikeCounts, time_steps: Optional[int] = None) -> float:
    """Count margin normalised to [-1, 1] by the number of time steps."""
    time_steps = counts.time_steps if time_steps is None else time_steps
    if time_steps < 1:
        raise InputError(f"time_steps must be at least 1, got {time_steps}")
    return (counts.preictal - counts.interictal) / time_steps
