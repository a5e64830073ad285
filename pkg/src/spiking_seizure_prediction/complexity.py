"""Static computation-complexity accounting and the figure of merit.

Counting convention (per sample)
--------------------------------
cnn: every multiply-accumulate of a convolution or fully connected layer is one MUL and
     one ADD (the bias add takes the place of the first accumulation); ReLU is one ADD
     per element; max pooling is ``window - 1`` comparisons (ADDs) per output.
snn: the same layers cost one ADD per selected weight and no MUL, repeated every time
     step; OR pooling costs ``window - 1`` ADDs per output and step; IF neurons cost two
     ADDs per step (accumulate, compare) plus one for a non-zero leak.
"""
import json
import math
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .cnn_reference import Conv1D, FullyConnected, MaxPool1D, NetworkSpec, Relu
from .utils.errors import InputError

FLOAT_BITS = 32
DEFAULT_FLOAT_FACTOR = 1.1
DEFAULT_T_REF = 10
DEFAULT_STEP_DIVISOR = 10.0
DEFAULT_BIT_WIDTH_FACTOR = 32.0


class CountMode(str, Enum):
    CNN = "cnn"
    SNN = "snn"


def _conv_layers(spec: NetworkSpec) -> list[tuple[Conv1D, tuple[int, ...]]]:
    return [
        (layer, shape) for layer, shape in zip(spec.layers, spec.output_shapes()) if isinstance(layer, Conv1D)
    ]


def t_cnn(spec: NetworkSpec, float_factor: float = DEFAULT_FLOAT_FACTOR) -> float:
    """Float-path time complexity: sum of ``M_H M_W (K_H K_W + K_H + K_W - 1) C_in C_out`` times ``float_factor``."""
    total = 0
    for layer, (_, m_h, m_w) in _conv_layers(spec):
        k_h, k_w = layer.kernel_h, layer.kernel_w
        total += m_h * m_w * (k_h * k_w + k_h + k_w - 1) * layer.c_in * layer.c_out
    return total * float_factor


def t_scnn(
    spec: NetworkSpec,
    time_steps: int,
    t_ref: int = DEFAULT_T_REF,
    step_divisor: float = DEFAULT_STEP_DIVISOR,
) -> float:
    """Spiking-path time complexity: ``M_H M_W (K_H + K_W - 1) C_in C_out / step_divisor``, scaled by ``T / t_ref``."""
    if time_steps < 1:
        raise InputError(f"time_steps must be at least 1, got {time_steps}")
    total = 0
    for layer, (_, m_h, m_w) in _conv_layers(spec):
        total += m_h * m_w * (layer.kernel_h + layer.kernel_w - 1) * layer.c_in * layer.c_out
    return total / step_divisor * (time_steps / t_ref)


def reduction_percent(
    spec: NetworkSpec,
    time_steps: int,
    float_factor: float = DEFAULT_FLOAT_FACTOR,
    t_ref: int = DEFAULT_T_REF,
    step_divisor: float = DEFAULT_STEP_DIVISOR,
) -> float:
    """``100 (1 - t_scnn / t_cnn)``."""
    reference = t_cnn(spec, float_factor)
    if reference <= 0:
        raise InputError("The network has no convolution layers; the reduction is undefined")
    return 100.0 * (1.0 - t_scnn(spec, time_steps, t_ref, step_divisor) / reference)


def bitwise_reduction_percent(
    spec: NetworkSpec,
    time_steps: int,
    bit_width_factor: float = DEFAULT_BIT_WIDTH_FACTOR,
    float_factor: float = DEFAULT_FLOAT_FACTOR,
    t_ref: int = DEFAULT_T_REF,
    step_divisor: float = DEFAULT_STEP_DIVISOR,
) -> float:
    """Reduction with the float dataflow additionally weighted by its bit width (32 bits against 1-bit spikes)."""
    reference = bit_width_factor * t_cnn(spec, float_factor)
    if reference <= 0:
        raise InputError("The network has no convolution layers; the reduction is undefined")
    return 100.0 * (1.0 - t_scnn(spec, time_steps, t_ref, step_divisor) / reference)


class OpCountReport(BaseModel):
    """Operation, memory and complexity summary of one network in one execution mode."""

    model_config = ConfigDict(frozen=True)

    mode: CountMode
    time_steps: int = Field(ge=1)
    t_cnn: float
    t_scnn: float
    adds: int = Field(ge=0)
    muls: int = Field(ge=0)
    memory_bits: int = Field(ge=0)
    weight_count: int = Field(ge=0)
    reduction_percent: Optional[float] = None
    bitwise_reduction_percent: Optional[float] = None
    per_layer: dict[int, dict[str, int]] = Field(default_factory=dict)

    def to_key_value(self) -> str:
        lines = []
        for key, value in self.model_dump(mode="json", exclude={"per_layer"}).items():
            lines.append(f"{key}={'nan' if value is None else value}")
        for index, counts in sorted(self.per_layer.items()):
            lines.append(f"layer.{index}.adds={counts['adds']}")
            lines.append(f"layer.{index}.muls={counts['muls']}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def weight_count(spec: NetworkSpec) -> int:
    """Number of weights plus biases."""
    return sum(int(np.prod(layer.weight_shape)) + int(np.prod(layer.bias_shape)) for layer in spec.weighted_layers)


def static_op_counts(
    spec: NetworkSpec,
    mode: CountMode | str,
    time_steps: int = 1,
    leak: float = 0.0,
    pool_mode: str = "or",
    float_factor: float = DEFAULT_FLOAT_FACTOR,
    t_ref: int = DEFAULT_T_REF,
    step_divisor: float = DEFAULT_STEP_DIVISOR,
    bit_width_factor: float = DEFAULT_BIT_WIDTH_FACTOR,
) -> OpCountReport:
    """Count the operations and memory of one inference.

    Parameters
    ----------
    spec : NetworkSpec
        Float network; in ``snn`` mode its spiking variant is counted.
    mode : CountMode | str
        ``"cnn"`` or ``"snn"``.
    time_steps : int, default: 1
        Spike train length; ignored for the activation memory of ``cnn`` mode.
    leak : float, default: 0.0
        IF leak; a non-zero leak adds one ADD per neuron and step.
    pool_mode : str, default: "or"
        ``"rate_max"`` also counts the running spike-count increments of the pooled inputs.
    """
    mode = CountMode(mode)
    if time_steps < 1:
        raise InputError(f"time_steps must be at least 1, got {time_steps}")
    counted = spec.spiking_variant() if mode is CountMode.SNN else spec
    repeats = time_steps if mode is CountMode.SNN else 1
    adds = muls = 0
    per_layer = {}
    input_shapes = counted.input_shapes()
    output_shapes = counted.output_shapes()
    for index, (layer, in_shape, out_shape) in enumerate(zip(counted.layers, input_shapes, output_shapes)):
        out_size = int(np.prod(out_shape))
        if isinstance(layer, (Conv1D, FullyConnected)):
            fan_in = layer.c_in * layer.kernel_size if isinstance(layer, Conv1D) else layer.in_dim
            macs = out_size * fan_in
            layer_adds = macs * repeats
            layer_muls = macs if mode is CountMode.CNN else 0
            per_layer[index] = {"adds": layer_adds, "muls": layer_muls}
            adds += layer_adds
            muls += layer_muls
            if mode is CountMode.SNN:
                adds += out_size * (3 if leak > 0 else 2) * repeats
        elif isinstance(layer, MaxPool1D):
            pool_adds = out_size * (layer.window - 1)
            if mode is CountMode.SNN and pool_mode == "rate_max":
                pool_adds += int(np.prod(in_shape))
            adds += pool_adds * repeats
        elif isinstance(layer, Relu):
            adds += out_size

    activation_values = int(np.prod(counted.input_shape)) + sum(int(np.prod(shape)) for shape in output_shapes)
    activation_bits = activation_values * (FLOAT_BITS if mode is CountMode.CNN else time_steps)
    n_weights = weight_count(counted)

    reference = t_cnn(spec, float_factor)
    spiking = t_scnn(spec, time_steps, t_ref, step_divisor)
    return OpCountReport(
        mode=mode,
        time_steps=time_steps,
        t_cnn=reference,
        t_scnn=spiking,
        adds=adds,
        muls=muls,
        memory_bits=FLOAT_BITS * n_weights + activation_bits,
        weight_count=n_weights,
        reduction_percent=100.0 * (1.0 - spiking / reference) if reference > 0 else None,
        bitwise_reduction_percent=(
            100.0 * (1.0 - spiking / (bit_width_factor * reference)) if reference > 0 else None
        ),
        per_layer=per_layer,
    )


def fom(sen: float, auc: float, fpr: float, mul: float, add: float, mem: float) -> float:
    """Figure of merit ``(sen + auc - fpr) / (2 (10 mul + add + mem))``.

    Rates are fractions in [0, 1], counts are raw. A missing (NaN) rate gives NaN.
    """
    rates = {"sen": sen, "auc": auc, "fpr": fpr}
    if any(math.isnan(value) for value in rates.values()):
        return math.nan
    for name, value in rates.items():
        if not 0.0 <= value <= 1.0:
            raise InputError(f"{name} must be a fraction in [0, 1], got {value}")
    if min(mul, add, mem) < 0:
        raise InputError(f"Operation counts must be non-negative, got mul={mul}, add={add}, mem={mem}")
    denominator = 2.0 * (10.0 * mul + add + mem)
    if denominator == 0:
        raise InputError("All operation counts are zero; the figure of merit is undefined")
    return (sen + auc - fpr) / denominator


def _or_nan(value) -> float:
    return math.nan if value is None else float(value)


def reference_comparison(reference_works: Sequence[dict], own: Optional[dict] = None) -> pd.DataFrame:
    """Figure of merit of published operation counts, optionally with this run's row appended.

    Rows carry ``name, sen, auc, fpr, adds, muls, mem``; missing rates stay NaN.
    """
    rows = list(reference_works) + ([own] if own is not None else [])
    records = []
    for row in rows:
        record = {key: _or_nan(row.get(key)) for key in ("sen", "auc", "fpr", "adds", "muls", "mem")}
        record["fom"] = fom(record["sen"], record["auc"], record["fpr"], record["muls"], record["adds"], record["mem"])
        records.append({"name": row["name"], **record})
    return pd.DataFrame.from_records(records, columns=["name", "sen", "auc", "fpr", "adds", "muls", "mem", "fom"])
