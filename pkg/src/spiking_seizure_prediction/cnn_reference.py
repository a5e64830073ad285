"""Float CNN with single-dimension kernels: topology, weights, inference and SGD training.

Activations are laid out [B, C, H, W] (or [C, H, W] for a single sample); C holds feature
channels, H the EEG electrodes and W time. A Conv1D kernel of shape 1 x k slides along W,
a k x 1 kernel along H. Convolutions are valid (no padding).
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Callable, Literal, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from .instrumentation import OpCounter
from .tools.tensor_files import ByteReader, pack_weights, unpack_weights
from .utils.errors import DivergenceError, InputError, StructuralError
from .utils.utils import atomic_write

logger = logging.getLogger(__name__)

Orientation = Literal["width", "height"]
Shape = tuple[int, ...]


class Conv1D(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["conv1d"] = "conv1d"
    kernel_h: int = Field(ge=1)
    kernel_w: int = Field(ge=1)
    c_in: int = Field(ge=1)
    c_out: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _single_dimension(self) -> "Conv1D":
        if self.kernel_h != 1 and self.kernel_w != 1:
            raise ValueError(f"Only single-dimension kernels are supported, got {self.kernel_h}x{self.kernel_w}")
        return self

    @property
    def axis(self) -> Orientation:
        return "width" if self.kernel_h == 1 else "height"

    @property
    def kernel_size(self) -> int:
        return max(self.kernel_h, self.kernel_w)

    @property
    def weight_shape(self) -> Shape:
        return (self.c_out, self.c_in, self.kernel_h, self.kernel_w)

    @property
    def bias_shape(self) -> Shape:
        return (self.c_out,)


class MaxPool1D(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["maxpool1d"] = "maxpool1d"
    window: int = Field(ge=1)
    orientation: Orientation = "width"


class Relu(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["relu"] = "relu"


class FullyConnected(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["fc"] = "fc"
    in_dim: int = Field(ge=1)
    out_dim: int = Field(ge=1)

    @property
    def weight_shape(self) -> Shape:
        return (self.out_dim, self.in_dim)

    @property
    def bias_shape(self) -> Shape:
        return (self.out_dim,)


Layer = Annotated[Union[Conv1D, MaxPool1D, Relu, FullyConnected], Field(discriminator="kind")]
WeightedLayer = Union[Conv1D, FullyConnected]


def _axis_length(shape: Shape, axis: Orientation) -> int:
    return shape[2] if axis == "width" else shape[1]


def _with_axis_length(shape: Shape, axis: Orientation, length: int, channels: Optional[int] = None) -> Shape:
    channels = shape[0] if channels is None else channels
    if axis == "width":
        return (channels, shape[1], length)
    return (channels, length, shape[2])


def layer_output_shape(layer: Layer, shape: Shape) -> Shape:
    """Output shape of ``layer`` for a single-sample input of ``shape``."""
    if isinstance(layer, Relu):
        return shape
    if isinstance(layer, FullyConnected):
        size = int(np.prod(shape))
        if size != layer.in_dim:
            raise StructuralError(f"Fully connected layer expects {layer.in_dim} inputs, got {size} from {shape}")
        return (layer.out_dim,)
    if len(shape) != 3:
        raise StructuralError(f"{layer.kind} needs a [C, H, W] input, got {shape}")
    if isinstance(layer, Conv1D):
        if shape[0] != layer.c_in:
            raise StructuralError(f"Conv1D expects {layer.c_in} input channels, got {shape[0]}")
        length = _axis_length(shape, layer.axis)
        if length < layer.kernel_size:
            raise StructuralError(f"Kernel of size {layer.kernel_size} is larger than the input extent {length}")
        return _with_axis_length(shape, layer.axis, (length - layer.kernel_size) // layer.stride + 1, layer.c_out)
    length = _axis_length(shape, layer.orientation)
    if layer.window > length:
        raise StructuralError(f"Pooling window {layer.window} exceeds the input extent {length}")
    return _with_axis_length(shape, layer.orientation, length // layer.window)


class NetworkSpec(BaseModel):
    """Ordered layer description shared by the float and spiking networks."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    input_shape: tuple[int, int, int]
    layers: list[Layer] = Field(default_factory=list)

    @model_validator(mode="after")
    def _shapes_chain(self) -> "NetworkSpec":
        if min(self.input_shape) < 1:
            raise ValueError(f"Input shape must be positive, got {self.input_shape}")
        self.output_shapes()
        return self

    def output_shapes(self) -> list[Shape]:
        """Output shape after every layer; raises StructuralError when the chain breaks."""
        shapes, shape = [], tuple(self.input_shape)
        for layer in self.layers:
            shape = layer_output_shape(layer, shape)
            shapes.append(shape)
        return shapes

    def input_shapes(self) -> list[Shape]:
        return [tuple(self.input_shape)] + self.output_shapes()[:-1]

    @property
    def weighted_layers(self) -> list[WeightedLayer]:
        return [layer for layer in self.layers if isinstance(layer, (Conv1D, FullyConnected))]

    @property
    def fingerprint(self) -> int:
        """First four bytes (little-endian) of the SHA-256 of the canonical JSON."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return int.from_bytes(hashlib.sha256(canonical.encode("utf-8")).digest()[:4], "little")

    def spiking_variant(self) -> "NetworkSpec":
        """The same network with Relu entries removed; IF neurons take over the activation."""
        layers = [layer for layer in self.layers if not isinstance(layer, Relu)]
        return NetworkSpec(input_shape=self.input_shape, layers=layers)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        return cls.model_validate_json(text)


def default_network_spec(
    input_shape: Sequence[int],
    kernel_size: int = 5,
    channels: Sequence[int] = (8, 8, 16, 16, 32),
    pool_window: int = 2,
    stride: int = 1,
    fc_hidden: int = 64,
    n_classes: int = 2,
    orientation: Orientation = "width",
) -> NetworkSpec:
    """Conv -> Relu -> MaxPool stacks (one per entry of ``channels``) followed by two FC layers."""
    input_shape = tuple(int(size) for size in input_shape)
    layers, shape = [], input_shape
    c_in = input_shape[0]
    kernel_h, kernel_w = (1, kernel_size) if orientation == "width" else (kernel_size, 1)
    for c_out in channels:
        stack = [
            Conv1D(kernel_h=kernel_h, kernel_w=kernel_w, c_in=c_in, c_out=c_out, stride=stride),
            Relu(),
            MaxPool1D(window=pool_window, orientation=orientation),
        ]
        for layer in stack:
            shape = layer_output_shape(layer, shape)
        layers.extend(stack)
        c_in = c_out
    flat = int(np.prod(shape))
    layers.extend(
        [FullyConnected(in_dim=flat, out_dim=fc_hidden), Relu(), FullyConnected(in_dim=fc_hidden, out_dim=n_classes)]
    )
    return NetworkSpec(input_shape=input_shape, layers=layers)


def save_network_spec(spec: NetworkSpec, file_path: str | Path):
    with atomic_write(file_path, mode="w") as f:
        f.write(spec.to_json())


def load_network_spec(file_path: str | Path) -> NetworkSpec:
    return NetworkSpec.from_json(Path(file_path).read_text(encoding="utf-8"))


def network_spec_json_schema() -> dict:
    return NetworkSpec.model_json_schema()


@dataclass(frozen=True)
class WeightContainer:
    """Float32 weights and biases of every weighted layer, keyed by weighted-layer ordinal.

    Ordinals count Conv1D and FullyConnected entries only, so the float spec and its
    spiking variant (Relu removed) address the same tensors.
    """

    fingerprint: int
    layers: dict[int, tuple[np.ndarray, np.ndarray]]
    version: int = 1

    def __post_init__(self):
        layers = {}
        for ordinal, (weight, bias) in self.layers.items():
            weight = np.asarray(weight, dtype=np.float32)
            bias = np.asarray(bias, dtype=np.float32)
            if not (np.isfinite(weight).all() and np.isfinite(bias).all()):
                raise InputError(f"Weights of layer {ordinal} contain non-finite values")
            layers[int(ordinal)] = (weight, bias)
        object.__setattr__(self, "layers", layers)

    def check_shapes(self, spec: NetworkSpec):
        """Raise StructuralError unless every weighted layer of ``spec`` has tensors of its shape."""
        weighted = spec.weighted_layers
        if set(self.layers) != set(range(len(weighted))):
            missing = sorted(set(range(len(weighted))) - set(self.layers))
            raise StructuralError(f"Weights do not match the network: missing layers {missing}")
        for ordinal, layer in enumerate(weighted):
            weight, bias = self.layers[ordinal]
            if weight.shape != layer.weight_shape or bias.shape != layer.bias_shape:
                raise StructuralError(
                    f"Layer {ordinal} expects weight {layer.weight_shape} and bias {layer.bias_shape}, "
                    f"got {weight.shape} and {bias.shape}"
                )

    def check_spec(self, spec: NetworkSpec):
        """Shape check plus fingerprint match."""
        if self.fingerprint != spec.fingerprint:
            raise StructuralError(
                f"Weight fingerprint {self.fingerprint:#010x} does not match network {spec.fingerprint:#010x}"
            )
        self.check_shapes(spec)

    def equals(self, other: "WeightContainer") -> bool:
        if self.fingerprint != other.fingerprint or set(self.layers) != set(other.layers):
            return False
        return all(
            np.array_equal(self.layers[key][0], other.layers[key][0])
            and np.array_equal(self.layers[key][1], other.layers[key][1])
            for key in self.layers
        )

    def to_bytes(self) -> bytes:
        triples = [(ordinal, weight, bias) for ordinal, (weight, bias) in sorted(self.layers.items())]
        return pack_weights(self.fingerprint, triples)

    @classmethod
    def from_reader(cls, reader: ByteReader) -> "WeightContainer":
        fingerprint, triples = unpack_weights(reader)
        return cls(fingerprint=fingerprint, layers={ordinal: (weight, bias) for ordinal, weight, bias in triples})

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "WeightContainer":
        layers = {
            ordinal: (np.zeros(layer.weight_shape), np.zeros(layer.bias_shape))
            for ordinal, layer in enumerate(spec.weighted_layers)
        }
        return cls(fingerprint=spec.fingerprint, layers=layers)

    @classmethod
    def random(cls, spec: NetworkSpec, seed: int, weight_scale: Optional[float] = None) -> "WeightContainer":
        params = init_parameters(spec, seed=seed, weight_scale=weight_scale)
        return cls(fingerprint=spec.fingerprint, layers=dict(enumerate(params)))


def save_weights(weights: WeightContainer, file_path: str | Path):
    with atomic_write(file_path) as f:
        f.write(weights.to_bytes())


def load_weights(file_path: str | Path) -> WeightContainer:
    return WeightContainer.from_reader(ByteReader(Path(file_path).read_bytes(), name="weight container"))


def _as_batch(x: np.ndarray, sample_ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == sample_ndim:
        return x[np.newaxis], True
    if x.ndim != sample_ndim + 1:
        raise StructuralError(f"Expected {sample_ndim} or {sample_ndim + 1} axes, got shape {x.shape}")
    return x, False


def axis_last(x: np.ndarray, axis: Orientation) -> np.ndarray:
    """View of a [B, C, H, W] tensor with the processed axis last."""
    return x if axis == "width" else np.swapaxes(x, 2, 3)


def conv_windows(layer: Conv1D, x: np.ndarray) -> tuple[np.ndarray, int]:
    """Batched [B, C, R, L] view of the input with the kernel axis last, and the output length."""
    if x.shape[1] != layer.c_in:
        raise StructuralError(f"Conv1D expects {layer.c_in} input channels, got {x.shape[1]}")
    xs = axis_last(x, layer.axis)
    length = xs.shape[-1]
    if length < layer.kernel_size:
        raise StructuralError(f"Kernel of size {layer.kernel_size} is larger than the input extent {length}")
    return xs, (length - layer.kernel_size) // layer.stride + 1


def conv_mac_count(layer: Conv1D, output: np.ndarray) -> int:
    """Multiply-accumulates of one sample: every output value sums c_in * k products."""
    return int(np.prod(output.shape[1:])) * layer.c_in * layer.kernel_size


def conv1d_forward(
    input: np.ndarray, layer: Conv1D, weight: np.ndarray, bias: np.ndarray, counter: Optional[OpCounter] = None
) -> np.ndarray:
    """Valid cross-correlation along the kernel axis plus a per-channel bias.

    Taps are accumulated one at a time in kernel order; the spiking convolution uses the
    same order so both paths agree bit for bit on 0/1 inputs.
    """
    x, single = _as_batch(np.asarray(input, dtype=np.float64), 3)
    xs, m = conv_windows(layer, x)
    kernel = np.asarray(weight, dtype=np.float64).reshape(layer.c_out, layer.c_in, layer.kernel_size)
    step = layer.stride
    out = np.zeros((xs.shape[0], layer.c_out, xs.shape[2], m))
    for j in range(layer.kernel_size):
        window = xs[..., j : j + step * (m - 1) + 1 : step]
        out += (kernel[np.newaxis, :, :, j, np.newaxis, np.newaxis] * window[:, np.newaxis]).sum(axis=2)
    out += np.asarray(bias, dtype=np.float64)[np.newaxis, :, np.newaxis, np.newaxis]
    if counter is not None:
        macs = x.shape[0] * conv_mac_count(layer, out)
        counter.record(adds=macs, muls=macs, per_layer=True)
    out = axis_last(out, layer.axis)
    return out[0] if single else out


def maxpool1d_forward(
    input: np.ndarray, window: int, orientation: Orientation = "width", counter: Optional[OpCounter] = None
) -> np.ndarray:
    """Max over non-overlapping windows; a trailing remainder shorter than ``window`` is dropped."""
    if window < 1:
        raise StructuralError(f"Pooling window must be at least 1, got {window}")
    x, single = _as_batch(np.asarray(input, dtype=np.float64), 3)
    xs = axis_last(x, orientation)
    n = xs.shape[-1] // window
    if n == 0:
        raise StructuralError(f"Pooling window {window} exceeds the input extent {xs.shape[-1]}")
    out = xs[..., : n * window].reshape(xs.shape[:-1] + (n, window)).max(axis=-1)
    if counter is not None:
        counter.record(adds=out.size * (window - 1))
    out = axis_last(out, orientation)
    return out[0] if single else out


def relu(input: np.ndarray, counter: Optional[OpCounter] = None) -> np.ndarray:
    out = np.maximum(np.asarray(input, dtype=np.float64), 0.0)
    if counter is not None:
        counter.record(adds=out.size)
    return out


def fc_forward(
    input: np.ndarray, weight: np.ndarray, bias: np.ndarray, counter: Optional[OpCounter] = None
) -> np.ndarray:
    """Affine map ``W x + b`` of a vector or a [B, in] batch."""
    weight = np.asarray(weight, dtype=np.float64)
    x, single = _as_batch(np.asarray(input, dtype=np.float64), 1)
    if weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise StructuralError(f"Fully connected weights {weight.shape} do not accept inputs of size {x.shape[1]}")
    out = (weight[np.newaxis] * x[:, np.newaxis, :]).sum(axis=-1) + np.asarray(bias, dtype=np.float64)
    if counter is not None:
        macs = out.size * weight.shape[1]
        counter.record(adds=macs, muls=macs, per_layer=True)
    return out[0] if single else out


def forward_with_activations(
    spec: NetworkSpec, weights: WeightContainer, sample: np.ndarray, counter: Optional[OpCounter] = None
) -> list[np.ndarray]:
    """Outputs of every layer for a [C, H, W] sample or a [B, C, H, W] batch (batched outputs)."""
    weights.check_spec(spec)
    x, _ = _as_batch(np.asarray(sample, dtype=np.float64), 3)
    if x.shape[1:] != tuple(spec.input_shape):
        raise StructuralError(f"Network expects samples of shape {spec.input_shape}, got {x.shape[1:]}")
    counter = counter if counter is not None else OpCounter()
    activations, ordinal = [], 0
    for index, layer in enumerate(spec.layers):
        with counter.layer(index):
            if isinstance(layer, Conv1D):
                x = conv1d_forward(x, layer, *weights.layers[ordinal], counter=counter)
                ordinal += 1
            elif isinstance(layer, FullyConnected):
                x = fc_forward(x.reshape(x.shape[0], -1), *weights.layers[ordinal], counter=counter)
                ordinal += 1
            elif isinstance(layer, MaxPool1D):
                x = maxpool1d_forward(x, layer.window, layer.orientation, counter=counter)
            else:
                x = relu(x, counter=counter)
        activations.append(x)
    return activations


def forward(
    spec: NetworkSpec, weights: WeightContainer, sample: np.ndarray, counter: Optional[OpCounter] = None
) -> np.ndarray:
    """Logits of a single [C, H, W] sample (or of every sample of a [B, C, H, W] batch)."""
    single = np.ndim(sample) == 3
    logits = forward_with_activations(spec, weights, sample, counter=counter)[-1]
    logits = logits.reshape(logits.shape[0], -1)
    return logits[0] if single else logits


def predict_logits(spec: NetworkSpec, weights: WeightContainer, samples: np.ndarray, batch: int = 64) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    chunks = [forward(spec, weights, samples[start : start + batch]) for start in range(0, len(samples), batch)]
    return np.concatenate(chunks, axis=0)


class TrainingConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = Field(default=0.05, ge=0.0)
    epochs: int = Field(default=20, ge=1)
    batch: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0)
    weight_scale: Optional[float] = Field(default=None, gt=0.0)
    train_bias: bool = True


def init_parameters(
    spec: NetworkSpec, seed: int, weight_scale: Optional[float] = None
) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-normal weights (or a fixed standard deviation ``weight_scale``) and zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for layer in spec.weighted_layers:
        fan_in = layer.c_in * layer.kernel_size if isinstance(layer, Conv1D) else layer.in_dim
        scale = weight_scale if weight_scale is not None else np.sqrt(2.0 / fan_in)
        params.append((rng.normal(0.0, scale, size=layer.weight_shape), np.zeros(layer.bias_shape)))
    return params


def _conv_train_forward(layer: Conv1D, x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    xs, m = conv_windows(layer, x)
    windows = sliding_window_view(xs, layer.kernel_size, axis=-1)[..., :: layer.stride, :][..., :m, :]
    kernel = weight.reshape(layer.c_out, layer.c_in, layer.kernel_size)
    out = np.einsum("bcrmk,ock->borm", windows, kernel, optimize=True) + bias[np.newaxis, :, np.newaxis, np.newaxis]
    return axis_last(out, layer.axis), (xs.shape, windows, m)


def _conv_train_backward(layer: Conv1D, dout: np.ndarray, weight: np.ndarray, cache):
    xs_shape, windows, m = cache
    dout = axis_last(dout, layer.axis)
    kernel = weight.reshape(layer.c_out, layer.c_in, layer.kernel_size)
    dkernel = np.einsum("borm,bcrmk->ock", dout, windows, optimize=True)
    dbias = dout.sum(axis=(0, 2, 3))
    dwindows = np.einsum("borm,ock->bcrmk", dout, kernel, optimize=True)
    dxs = np.zeros(xs_shape)
    step = layer.stride
    for j in range(layer.kernel_size):
        dxs[..., j : j + step * (m - 1) + 1 : step] += dwindows[..., j]
    return axis_last(dxs, layer.axis), dkernel.reshape(weight.shape), dbias


def _pool_train_forward(layer: MaxPool1D, x: np.ndarray):
    xs = axis_last(x, layer.orientation)
    n = xs.shape[-1] // layer.window
    blocks = xs[..., : n * layer.window].reshape(xs.shape[:-1] + (n, layer.window))
    argmax = blocks.argmax(axis=-1)[..., np.newaxis]
    out = np.take_along_axis(blocks, argmax, axis=-1)[..., 0]
    return axis_last(out, layer.orientation), (xs.shape, blocks.shape, argmax)


def _pool_train_backward(layer: MaxPool1D, dout: np.ndarray, cache):
    xs_shape, blocks_shape, argmax = cache
    dblocks = np.zeros(blocks_shape)
    np.put_along_axis(dblocks, argmax, axis_last(dout, layer.orientation)[..., np.newaxis], axis=-1)
    dxs = np.zeros(xs_shape)
    dxs[..., : blocks_shape[-2] * blocks_shape[-1]] = dblocks.reshape(blocks_shape[:-2] + (-1,))
    return axis_last(dxs, layer.orientation)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of integer labels and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(len(labels))
    loss = -log_probs[rows, labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / len(labels)


def loss_and_gradients(
    spec: NetworkSpec, params: list[tuple[np.ndarray, np.ndarray]], samples: np.ndarray, labels: np.ndarray
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Softmax cross-entropy of a batch and its gradient for every (weight, bias) pair."""
    x = np.asarray(samples, dtype=np.float64)
    caches, ordinal = [], 0
    for layer in spec.layers:
        if isinstance(layer, Conv1D):
            x, cache = _conv_train_forward(layer, x, *params[ordinal])
            caches.append((ordinal, cache))
            ordinal += 1
        elif isinstance(layer, FullyConnected):
            flat = x.reshape(x.shape[0], -1)
            caches.append((ordinal, (x.shape, flat)))
            weight, bias = params[ordinal]
            x = flat @ weight.T + bias
            ordinal += 1
        elif isinstance(layer, MaxPool1D):
            x, cache = _pool_train_forward(layer, x)
            caches.append((None, cache))
        else:
            caches.append((None, x > 0))
            x = np.maximum(x, 0.0)
    loss, dx = softmax_cross_entropy(x.reshape(x.shape[0], -1), np.asarray(labels))

    grads: list = [None] * len(params)
    for layer, (ordinal, cache) in zip(reversed(spec.layers), reversed(caches)):
        if isinstance(layer, Conv1D):
            dx, dweight, dbias = _conv_train_backward(layer, dx, params[ordinal][0], cache)
            grads[ordinal] = (dweight, dbias)
        elif isinstance(layer, FullyConnected):
            input_shape, flat = cache
            weight = params[ordinal][0]
            grads[ordinal] = (dx.T @ flat, dx.sum(axis=0))
            dx = (dx @ weight).reshape(input_shape)
        elif isinstance(layer, MaxPool1D):
            dx = _pool_train_backward(layer, dx, cache)
        else:
            dx = dx * cache
    return loss, grads


def train_sgd(
    spec: NetworkSpec,
    samples: np.ndarray,
    labels: np.ndarray,
    hyper: TrainingConfig,
    callback: Optional[Callable[[int, float], None]] = None,
    initial: Optional[WeightContainer] = None,
    verbose: bool = False,
) -> WeightContainer:
    """Mini-batch SGD on softmax cross-entropy; deterministic given ``hyper.seed``.

    Parameters
    ----------
    spec : NetworkSpec
        Network to train.
    samples : np.ndarray
        [N, C, H, W] training inputs.
    labels : np.ndarray
        [N] integer class labels (0 interictal, 1 preictal).
    hyper : TrainingConfig
        Learning rate, epochs, batch size and seed. With ``train_bias=False`` the biases keep
        their initial values (zero unless ``initial`` is given), which makes the network
        positively homogeneous and easier to convert.
    callback : Callable[[int, float], None], optional
        Called after each epoch with the epoch number and its mean batch loss.
    initial : WeightContainer, optional
        Starting weights; seeded He initialisation when omitted.
    verbose : bool, optional
        Show a progress bar over epochs.

    Returns
    -------
    WeightContainer
        The trained weights, stored as float32.
    """
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(samples) == 0:
        raise InputError("Cannot train on an empty dataset")
    if len(samples) != len(labels):
        raise StructuralError(f"{len(samples)} samples but {len(labels)} labels")
    if len(np.unique(labels)) < 2:
        raise InputError("Training needs both classes to be present")
    if initial is not None:
        initial.check_spec(spec)
        params = [
            (initial.layers[k][0].astype(np.float64), initial.layers[k][1].astype(np.float64))
            for k in range(len(spec.weighted_layers))
        ]
    else:
        params = init_parameters(spec, seed=hyper.seed, weight_scale=hyper.weight_scale)

    rng = np.random.default_rng(hyper.seed)
    for epoch in tqdm(range(1, hyper.epochs + 1), desc="Training", disable=not verbose):
        order = rng.permutation(len(samples))
        losses = []
        for start in range(0, len(samples), hyper.batch):
            batch = order[start : start + hyper.batch]
            loss, grads = loss_and_gradients(spec, params, samples[batch], labels[batch])
            if not np.isfinite(loss):
                raise DivergenceError(epoch=epoch, loss=loss)
            params = [
                (w - hyper.lr * dw, b - hyper.lr * db if hyper.train_bias else b)
                for (w, b), (dw, db) in zip(params, grads)
            ]
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        logger.debug("epoch %d loss %.6f", epoch, epoch_loss)
        if callback is not None:
            callback(epoch, epoch_loss)
    return WeightContainer(fingerprint=spec.fingerprint, layers=dict(enumerate(params)))
