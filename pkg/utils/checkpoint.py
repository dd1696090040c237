"""Flat binary checkpoints for MlpParams

Layout (little-endian):
    magic        4 bytes  b"HFCK"
    version      uint32
    layer count  uint32   L
    dims         uint32 x (L + 1)
    activation   uint32   0 = sine, 1 = finer
    omega0       float64
then for each layer its row-major float64 weights followed by its biases.
"""
import struct
from pathlib import Path
from typing import Union

import numpy as np

from config import constants
from services.net import Activation, MlpParams
from utils.errors import CheckpointError

_HEAD = struct.Struct("<4sII")


def to_bytes(params: MlpParams) -> bytes:
    dims = params.dims
    parts = [
        _HEAD.pack(constants.CHECKPOINT_MAGIC, constants.CHECKPOINT_VERSION, len(params.weights)),
        struct.pack(f"<{len(dims)}I", *dims),
        struct.pack("<Id", constants.ACTIVATION_IDS[params.activation.kind], params.activation.omega0),
    ]
    for W, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def from_bytes(blob: bytes) -> MlpParams:
    try:
        magic, version, n_layers = _HEAD.unpack_from(blob, 0)
        if magic != constants.CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        if version != constants.CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        offset = _HEAD.size
        dims = struct.unpack_from(f"<{n_layers + 1}I", blob, offset)
        offset += 4 * (n_layers + 1)
        act_id, omega0 = struct.unpack_from("<Id", blob, offset)
        offset += struct.calcsize("<Id")

        kinds = {v: k for k, v in constants.ACTIVATION_IDS.items()}
        if act_id not in kinds:
            raise CheckpointError(f"unknown activation id {act_id}")

        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            W = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=offset)
            offset += W.nbytes
            b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
            offset += b.nbytes
            weights.append(W.reshape(fan_out, fan_in).astype(np.float64))
            biases.append(b.astype(np.float64))
        if offset != len(blob):
            raise CheckpointError(f"{len(blob) - offset} trailing bytes")
    except (struct.error, ValueError) as e:
        raise CheckpointError(f"truncated or malformed checkpoint: {e}") from e
    return MlpParams(weights, biases, Activation(kinds[act_id], omega0))


def save_checkpoint(params: MlpParams, path: Union[str, Path]) -> None:
    Path(path).write_bytes(to_bytes(params))


def load_checkpoint(path: Union[str, Path]) -> MlpParams:
    return from_bytes(Path(path).read_bytes())
