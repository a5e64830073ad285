"""Map trained CNN weights onto the spiking topology and calibrate per-layer firing thresholds."""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .cnn_reference import NetworkSpec, WeightContainer
from .snn_engine import IfConfig, PoolMode, decide, run_network_batch
from .spike_encoder import SpikeTrain
from .tools.tensor_files import ByteReader, pack_if_block, unpack_if_block
from .utils.errors import CalibrationError, FormatError, StructuralError
from .utils.utils import atomic_write

logger = logging.getLogger(__name__)

FALLBACK_THRESHOLD = 1.0


@dataclass(frozen=True)
class SnnModel:
    """A spiking network ready for inference.

    ``weights`` is the source CNN's container unchanged, so it still carries the CNN
    fingerprint; ``source_fingerprint`` records it explicitly for provenance.
    """

    spec: NetworkSpec
    weights: WeightContainer
    if_cfgs: tuple[IfConfig, ...]
    source_fingerprint: int
    pool_mode: PoolMode = PoolMode.OR
    calibration: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "if_cfgs", tuple(self.if_cfgs))
        object.__setattr__(self, "pool_mode", PoolMode(self.pool_mode))
        if len(self.if_cfgs) != len(self.spec.weighted_layers):
            raise StructuralError(
                f"{len(self.spec.weighted_layers)} weighted layers but {len(self.if_cfgs)} IF configurations"
            )
        resting = [layer for layer, cfg in enumerate(self.if_cfgs) if cfg.v_rest != 0.0]
        if resting:
            raise StructuralError(f"Converted networks rest at v_rest = 0; layers {resting} do not")
        self.weights.check_shapes(self.spec)

    @property
    def thresholds(self) -> list[float]:
        return [cfg.v_th for cfg in self.if_cfgs]

    def with_thresholds(self, thresholds: Sequence[float], **calibration) -> "SnnModel":
        cfgs = tuple(cfg.model_copy(update={"v_th": float(v)}) for cfg, v in zip(self.if_cfgs, thresholds))
        return replace(self, if_cfgs=cfgs, calibration={**self.calibration, **calibration})

    def equals(self, other: "SnnModel") -> bool:
        return (
            self.spec == other.spec
            and self.weights.equals(other.weights)
            and self.if_cfgs == other.if_cfgs
            and self.source_fingerprint == other.source_fingerprint
            and self.pool_mode == other.pool_mode
            and self.calibration == other.calibration
        )


def map_weights(
    cnn_spec: NetworkSpec,
    cnn_weights: WeightContainer,
    if_cfg: Optional[IfConfig] = None,
    pool_mode: PoolMode | str = PoolMode.OR,
) -> SnnModel:
    """Build the spiking model of a trained CNN: Relu entries dropped, weights shared verbatim.

    Every layer starts from ``if_cfg`` (default ``v_th=1, v_rest=0, leak=0``).
    """
    cnn_weights.check_spec(cnn_spec)
    if_cfg = if_cfg if if_cfg is not None else IfConfig()
    spiking_spec = cnn_spec.spiking_variant()
    return SnnModel(
        spec=spiking_spec,
        weights=cnn_weights,
        if_cfgs=(if_cfg,) * len(spiking_spec.weighted_layers),
        source_fingerprint=cnn_weights.fingerprint,
        pool_mode=pool_mode,
        calibration={"method": "none"},
    )


def _stack(trains: Sequence[SpikeTrain] | np.ndarray) -> np.ndarray:
    if isinstance(trains, np.ndarray):
        return trains.astype(np.bool_, copy=False)
    return np.stack([train.bits for train in trains]) if len(trains) else np.zeros((0,), dtype=np.bool_)


def _layer_statistic(
    model: SnnModel, bits: np.ndarray, layer: int, percentile: float, statistic: str, batch: int
) -> float:
    chunks = []
    for start in range(0, len(bits), batch):
        run = run_network_batch(
            model.spec, model.weights, bits[start : start + batch], model.if_cfgs, model.pool_mode, record=True
        )
        inputs = run.peak_inputs if statistic == "max" else run.mean_inputs
        chunks.append(inputs[layer].ravel())
    return float(np.percentile(np.concatenate(chunks), percentile))


def validation_accuracy(
    model: SnnModel,
    trains: Sequence[SpikeTrain] | np.ndarray,
    labels: Sequence[int],
    count_threshold: int = 0,
    batch: int = 32,
) -> float:
    """Fraction of trains whose count decision matches its label."""
    bits = _stack(trains)
    predictions = []
    for start in range(0, len(bits), batch):
        run = run_network_batch(model.spec, model.weights, bits[start : start + batch], model.if_cfgs, model.pool_mode)
        predictions.extend(int(decide(counts, count_threshold)) for counts in run.spike_counts())
    return float(np.mean(np.asarray(predictions) == np.asarray(labels)))


def calibrate_thresholds(
    model: SnnModel,
    calibration: Sequence[SpikeTrain] | np.ndarray,
    grid: Sequence[float] = (),
    validation: Optional[tuple[Sequence[SpikeTrain] | np.ndarray, Sequence[int]]] = None,
    percentile: float = 100.0,
    statistic: Literal["max", "mean"] = "max",
    normalize: bool = True,
    batch: int = 32,
    verbose: bool = False,
) -> SnnModel:
    """Choose a firing threshold per layer.

    Layers are calibrated in order in the spiking domain: the threshold of layer ``l`` is
    the ``percentile`` (100 = maximum) of the weighted input its neurons receive in a single
    step over the calibration trains, measured with layers before ``l`` already calibrated.
    ``statistic="mean"`` averages each neuron's input over the steps first. A layer whose
    statistic is not above ``v_rest`` falls back to ``v_th = 1`` with a warning.

    When ``grid`` is given, each layer's threshold is then replaced, layer by layer, by the
    grid value with the best accuracy on ``validation``; ties go to the smallest value.

    Parameters
    ----------
    model : SnnModel
        Model whose thresholds are calibrated; it is not modified.
    calibration : Sequence[SpikeTrain] | np.ndarray
        Encoded calibration samples.
    grid : Sequence[float], optional
        Candidate thresholds for the accuracy search.
    validation : tuple, optional
        (trains, labels) scored during the grid search; required with ``grid``.
    percentile : float, default: 100.0
        Percentile of the weighted inputs taken as the threshold.
    statistic : {"max", "mean"}, default: "max"
        Per-neuron peak of the single-step input, or its time average.
    normalize : bool, default: True
        Run the max-normalization pass; otherwise the grid starts from the current thresholds.

    Returns
    -------
    SnnModel
        A copy with new thresholds and the calibration provenance recorded.
    """
    bits = _stack(calibration)
    if len(bits) == 0:
        raise CalibrationError("Calibration needs at least one sample")
    if not 0.0 < percentile <= 100.0:
        raise CalibrationError(f"percentile must be in (0, 100], got {percentile}")
    if statistic not in ("max", "mean"):
        raise CalibrationError(f"statistic must be 'max' or 'mean', got {statistic!r}")
    grid = sorted(float(value) for value in grid)
    if grid and validation is None:
        raise CalibrationError("A threshold grid needs a labelled validation set")
    if any(value <= 0 for value in grid):
        raise CalibrationError(f"Grid thresholds must be positive, got {grid}")

    n_layers = len(model.spec.weighted_layers)
    thresholds = model.thresholds
    fallback_layers = []
    if normalize:
        for layer in tqdm(range(n_layers), desc="Calibrating", disable=not verbose):
            current = model.with_thresholds(thresholds)
            peak = _layer_statistic(current, bits, layer, percentile, statistic, batch)
            if peak <= current.if_cfgs[layer].v_rest:
                logger.warning(
                    "Layer %d never receives positive input on the calibration set; using v_th = %s",
                    layer,
                    FALLBACK_THRESHOLD,
                )
                peak = FALLBACK_THRESHOLD
                fallback_layers.append(layer)
            thresholds[layer] = peak
            logger.debug("layer %d v_th %.6g", layer, peak)

    provenance = {
        "method": "max_normalization" if normalize else "none",
        "percentile": percentile,
        "statistic": statistic,
        "samples": int(len(bits)),
        "fallback_layers": fallback_layers,
    }
    if grid:
        val_bits = _stack(validation[0])
        val_labels = np.asarray(validation[1])
        best_accuracy = None
        for layer in range(n_layers):
            scores = []
            for value in grid:
                candidate = list(thresholds)
                candidate[layer] = value
                scores.append(validation_accuracy(model.with_thresholds(candidate), val_bits, val_labels))
            # first maximum of the ascending grid is the smallest tied value
            best = int(np.argmax(scores))
            thresholds[layer] = grid[best]
            best_accuracy = scores[best]
        provenance.update(
            method="max_normalization+grid" if normalize else "grid", grid=grid, validation_accuracy=best_accuracy
        )
    return model.with_thresholds(thresholds, **provenance)


def _metadata(model: SnnModel) -> str:
    document = {
        "spec": model.spec.model_dump(mode="json"),
        "source_fingerprint": model.source_fingerprint,
        "pool_mode": model.pool_mode.value,
        "calibration": model.calibration,
    }
    return json.dumps(document, sort_keys=True)


def model_to_bytes(model: SnnModel) -> bytes:
    parameters = [(cfg.v_th, cfg.v_rest, cfg.leak, cfg.reset_code) for cfg in model.if_cfgs]
    return model.weights.to_bytes() + pack_if_block(parameters, _metadata(model))


def model_from_bytes(data: bytes) -> SnnModel:
    reader = ByteReader(data, name="spiking model file")
    weights = WeightContainer.from_reader(reader)
    metadata_offset = reader.offset
    parameters, metadata_json = unpack_if_block(reader)
    if reader.remaining():
        raise FormatError(f"{reader.remaining()} unexpected trailing bytes in spiking model file", offset=reader.offset)
    try:
        metadata = json.loads(metadata_json)
        spec = NetworkSpec.model_validate(metadata["spec"])
    except (ValueError, KeyError) as exception:
        raise FormatError(f"Malformed spiking model metadata: {exception}", offset=metadata_offset) from exception
    if metadata.get("source_fingerprint") != weights.fingerprint:
        raise StructuralError(
            f"Weight fingerprint {weights.fingerprint:#010x} does not match the recorded source network "
            f"{metadata.get('source_fingerprint')}"
        )
    if_cfgs = [IfConfig.from_code(*parameter) for parameter in parameters]
    return SnnModel(
        spec=spec,
        weights=weights,
        if_cfgs=tuple(if_cfgs),
        source_fingerprint=weights.fingerprint,
        pool_mode=metadata.get("pool_mode", PoolMode.OR.value),
        calibration=metadata.get("calibration", {}),
    )


def save_model(model: SnnModel, file_path: str | Path):
    with atomic_write(file_path) as f:
        f.write(model_to_bytes(model))


def load_model(file_path: str | Path) -> SnnModel:
    return model_from_bytes(Path(file_path).read_bytes())
