"""Little-endian binary codecs for spike trains, window batches, weights and SNN parameters.

Layouts
-------
SPKT (spike train):  "SPKT" | version u32 | T, C, H, W u32 | bits packed MSB-first, row-major
EEGW (window batch): "EEGW" | version u32 | N, C, H, W u32 | N label bytes | float32 payload
SCNW (CNN weights):  "SCNW" | version u16 | fingerprint u32 | layer count u16 |
                     per layer: index u16, weight tensor, bias tensor
                     tensor = rank u8 | dims u32 | float32 payload
IF block (SNN model, appended after SCNW): count u16 | per layer v_th, v_rest, leak f64, reset u8 |
                     metadata length u32 | UTF-8 JSON metadata
"""
import struct
from pathlib import Path

import numpy as np

from ..utils.errors import FormatError, UnsupportedVersionError
from ..utils.utils import atomic_write

SPIKE_MAGIC = b"SPKT"
SPIKE_VERSION = 1
WINDOW_MAGIC = b"EEGW"
WINDOW_VERSION = 1
WEIGHT_MAGIC = b"SCNW"
WEIGHT_VERSION = 1

_TENSOR_HEADER = struct.Struct("<4sI4I")


class ByteReader:
    """Sequential reader over a byte buffer that reports truncation with offsets."""

    def __init__(self, data: bytes, offset: int = 0, name: str = "file"):
        self.data = data
        self.offset = offset
        self.name = name

    def read(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise FormatError(
                f"Truncated {self.name}: expected {size} bytes, only {len(self.data) - self.offset} remain",
                offset=self.offset,
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> tuple:
        layout = struct.Struct(fmt)
        return layout.unpack(self.read(layout.size))

    def remaining(self) -> int:
        return len(self.data) - self.offset


def _check_magic(reader: ByteReader, magic: bytes):
    found = reader.read(len(magic))
    if found != magic:
        raise FormatError(f"Bad magic in {reader.name}: expected {magic!r}, found {found!r}", offset=0)


def _check_version(version: int, supported: int, offset: int, name: str):
    if version != supported:
        raise UnsupportedVersionError(
            f"Unsupported {name} version {version}; this code reads version {supported}", offset=offset
        )


def write_spike_file(file_path: str | Path, bits: np.ndarray):
    """Write a [T, C, H, W] binary tensor as a packed SPKT file."""
    bits = np.asarray(bits, dtype=np.bool_)
    header = _TENSOR_HEADER.pack(SPIKE_MAGIC, SPIKE_VERSION, *bits.shape)
    with atomic_write(file_path) as f:
        f.write(header)
        f.write(np.packbits(bits.ravel()).tobytes())


def read_spike_file(file_path: str | Path) -> np.ndarray:
    """Read a SPKT file back into a boolean [T, C, H, W] array."""
    reader = ByteReader(Path(file_path).read_bytes(), name="spike train file")
    _check_magic(reader, SPIKE_MAGIC)
    (version,) = reader.unpack("<I")
    _check_version(version, SPIKE_VERSION, offset=4, name="spike train")
    shape = reader.unpack("<4I")
    n_bits = int(np.prod(shape))
    packed = np.frombuffer(reader.read((n_bits + 7) // 8), dtype=np.uint8)
    return np.unpackbits(packed, count=n_bits).astype(np.bool_).reshape(shape)


def write_window_file(file_path: str | Path, matrices: np.ndarray, labels: np.ndarray):
    """Write N samples of shape [C, H, W] with one label byte each as an EEGW file."""
    matrices = np.asarray(matrices, dtype="<f4")
    labels = np.asarray(labels, dtype=np.uint8)
    if matrices.ndim != 4 or labels.shape != (matrices.shape[0],):
        raise FormatError(f"Window batches need [N, C, H, W] data and N labels, got {matrices.shape}, {labels.shape}")
    with atomic_write(file_path) as f:
        f.write(_TENSOR_HEADER.pack(WINDOW_MAGIC, WINDOW_VERSION, *matrices.shape))
        f.write(labels.tobytes())
        f.write(matrices.tobytes())


def read_window_file(file_path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read an EEGW file into (float32 [N, C, H, W] data, uint8 labels)."""
    reader = ByteReader(Path(file_path).read_bytes(), name="window batch file")
    _check_magic(reader, WINDOW_MAGIC)
    (version,) = reader.unpack("<I")
    _check_version(version, WINDOW_VERSION, offset=4, name="window batch")
    shape = reader.unpack("<4I")
    labels = np.frombuffer(reader.read(shape[0]), dtype=np.uint8).copy()
    n_values = int(np.prod(shape))
    matrices = np.frombuffer(reader.read(4 * n_values), dtype="<f4").reshape(shape).copy()
    return matrices, labels


def pack_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype="<f4")
    return struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape) + array.tobytes()


def unpack_tensor(reader: ByteReader) -> np.ndarray:
    (rank,) = reader.unpack("<B")
    shape = reader.unpack(f"<{rank}I")
    n_values = int(np.prod(shape)) if rank else 1
    return np.frombuffer(reader.read(4 * n_values), dtype="<f4").reshape(shape).astype(np.float32)


def pack_weights(fingerprint: int, layers: list[tuple[int, np.ndarray, np.ndarray]]) -> bytes:
    """Serialize (layer index, weight, bias) triples into an SCNW byte string."""
    chunks = [WEIGHT_MAGIC, struct.pack("<HIH", WEIGHT_VERSION, fingerprint, len(layers))]
    for layer_index, weight, bias in layers:
        chunks.append(struct.pack("<H", layer_index))
        chunks.append(pack_tensor(weight))
        chunks.append(pack_tensor(bias))
    return b"".join(chunks)


def unpack_weights(reader: ByteReader) -> tuple[int, list[tuple[int, np.ndarray, np.ndarray]]]:
    """Parse an SCNW byte string; returns the fingerprint and (index, weight, bias) triples."""
    _check_magic(reader, WEIGHT_MAGIC)
    (version,) = reader.unpack("<H")
    _check_version(version, WEIGHT_VERSION, offset=4, name="weight container")
    fingerprint, n_layers = reader.unpack("<IH")
    layers = []
    for _ in range(n_layers):
        (layer_index,) = reader.unpack("<H")
        weight = unpack_tensor(reader)
        bias = unpack_tensor(reader)
        layers.append((layer_index, weight, bias))
    return fingerprint, layers


def pack_if_block(parameters: list[tuple[float, float, float, int]], metadata_json: str) -> bytes:
    """Serialize per-layer (v_th, v_rest, leak, reset code) and a JSON metadata document."""
    chunks = [struct.pack("<H", len(parameters))]
    for v_th, v_rest, leak, reset_code in parameters:
        chunks.append(struct.pack("<dddB", v_th, v_rest, leak, reset_code))
    metadata = metadata_json.encode("utf-8")
    chunks.append(struct.pack("<I", len(metadata)))
    chunks.append(metadata)
    return b"".join(chunks)


def unpack_if_block(reader: ByteReader) -> tuple[list[tuple[float, float, float, int]], str]:
    (n_layers,) = reader.unpack("<H")
    parameters = [reader.unpack("<dddB") for _ in range(n_layers)]
    (length,) = reader.unpack("<I")
    metadata_json = reader.read(length).decode("utf-8")
    return parameters, metadata_json
