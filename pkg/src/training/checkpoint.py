"""
Binary checkpoints of model parameters and optional Adam state.

Layout:
    b"FMT1"                  magic
    1 byte                   format version
    uint32 little-endian     manifest length in bytes
    manifest                 UTF-8 JSON (config, tensor name/shape/offset, adam hyperparameters)
    payload                  little-endian float64 values, offsets relative to payload start
"""

import struct
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ValidationError

from src.autograd.optim import AdamState
from src.config.settings import ModelSettings
from src.models.fmt import FmtModel
from src.utils.exceptions import CheckpointCompatibilityError, CheckpointFormatError

MAGIC = b"FMT1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBI")
_FLOAT = np.dtype("<f8")

FIRST_MOMENT_PREFIX = "adam.m."
SECOND_MOMENT_PREFIX = "adam.v."


class TensorEntry(BaseModel):
    name: str
    shape: List[int]
    offset: int


class AdamEntry(BaseModel):
    lr: float
    beta1: float
    beta2: float
    eps: float
    step_count: int


class Manifest(BaseModel):
    config: Dict
    tensors: List[TensorEntry]
    adam: Optional[AdamEntry] = None


def _named_arrays(
    model: FmtModel, adam_state: Optional[AdamState]
) -> List[Tuple[str, np.ndarray]]:
    state = model.state_dict()
    arrays = list(state.items())
    if adam_state is not None:
        arrays += [(FIRST_MOMENT_PREFIX + n, adam_state.first_moment[n]) for n in state]
        arrays += [(SECOND_MOMENT_PREFIX + n, adam_state.second_moment[n]) for n in state]
    return arrays


def encode_checkpoint(model: FmtModel, adam_state: Optional[AdamState] = None) -> bytes:
    """Serialize a model (and optionally its optimizer state) to bytes."""
    entries: List[TensorEntry] = []
    chunks: List[bytes] = []
    offset = 0
    for name, value in _named_arrays(model, adam_state):
        data = np.ascontiguousarray(value, dtype=_FLOAT).tobytes()
        entries.append(TensorEntry(name=name, shape=list(value.shape), offset=offset))
        chunks.append(data)
        offset += len(data)

    adam = None
    if adam_state is not None:
        adam = AdamEntry(
            lr=adam_state.lr,
            beta1=adam_state.beta1,
            beta2=adam_state.beta2,
            eps=adam_state.eps,
            step_count=adam_state.step_count,
        )
    manifest = Manifest(
        config=model.settings.model_dump(mode="json"), tensors=entries, adam=adam
    ).model_dump_json()
    manifest_bytes = manifest.encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest_bytes)) + manifest_bytes + b"".join(
        chunks
    )


def save_checkpoint(
    model: FmtModel,
    path: Union[str, Path],
    adam_state: Optional[AdamState] = None,
) -> Path:
    """
    Write a checkpoint file.

    Args:
        model: Model to save
        path: Target path (parent directories are created)
        adam_state: Optimizer state to include

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = encode_checkpoint(model, adam_state)
    path.write_bytes(payload)
    logger.info(f"Saved checkpoint to {path} ({len(payload)} bytes)")
    return path


def _read_manifest(blob: bytes) -> Tuple[Manifest, memoryview]:
    if len(blob) < _HEADER.size:
        raise CheckpointFormatError("file too short for a checkpoint header")
    magic, version, manifest_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointFormatError(f"unknown magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    start = _HEADER.size
    if len(blob) < start + manifest_len:
        raise CheckpointFormatError("checkpoint truncated inside the manifest")
    try:
        manifest = Manifest.model_validate_json(blob[start : start + manifest_len])
    except ValidationError as e:
        raise CheckpointFormatError(f"corrupt checkpoint manifest: {e}") from e

    payload = memoryview(blob)[start + manifest_len :]
    expected = sum(int(np.prod(t.shape)) * _FLOAT.itemsize for t in manifest.tensors)
    if len(payload) != expected:
        raise CheckpointFormatError(
            f"checkpoint payload has {len(payload)} bytes, manifest describes {expected}"
        )
    return manifest, payload


def _tensor(entry: TensorEntry, payload: memoryview) -> np.ndarray:
    count = int(np.prod(entry.shape))
    end = entry.offset + count * _FLOAT.itemsize
    if entry.offset < 0 or end > len(payload):
        raise CheckpointFormatError(f"tensor {entry.name!r} lies outside the payload")
    values = np.frombuffer(payload[entry.offset : end], dtype=_FLOAT)
    return values.astype(np.float64).reshape(entry.shape)


def decode_checkpoint(
    blob: bytes,
    settings: Optional[ModelSettings] = None,
) -> Tuple[FmtModel, Optional[AdamState]]:
    """
    Rebuild a model from checkpoint bytes.

    Args:
        blob: Checkpoint contents
        settings: Configuration the caller expects; defaults to the stored one

    Returns:
        The model and the stored Adam state (None when absent)
    """
    manifest, payload = _read_manifest(blob)
    if settings is None:
        try:
            settings = ModelSettings(**manifest.config)
        except ValidationError as e:
            raise CheckpointFormatError(f"stored model config is invalid: {e}") from e

    entries = {t.name: t for t in manifest.tensors}
    model = FmtModel(settings)
    params = model.named_parameters()
    for name, param in params.items():
        entry = entries.get(name)
        if entry is None:
            raise CheckpointCompatibilityError(f"checkpoint has no tensor {name!r}", name)
        if tuple(entry.shape) != param.shape:
            raise CheckpointCompatibilityError(
                f"tensor {name!r} has shape {tuple(entry.shape)} in the checkpoint, "
                f"model expects {param.shape}",
                name,
            )
    for name, param in params.items():
        param.data = _tensor(entries[name], payload)

    adam_state = None
    if manifest.adam is not None:
        adam_state = AdamState(
            **manifest.adam.model_dump(),
            first_moment={
                n: _tensor(entries[FIRST_MOMENT_PREFIX + n], payload) for n in params
            },
            second_moment={
                n: _tensor(entries[SECOND_MOMENT_PREFIX + n], payload) for n in params
            },
        )
    return model, adam_state


def load_checkpoint(
    path: Union[str, Path],
    settings: Optional[ModelSettings] = None,
) -> Tuple[FmtModel, Optional[AdamState]]:
    """Read a checkpoint written by save_checkpoint()."""
    path = Path(path)
    model, adam_state = decode_checkpoint(path.read_bytes(), settings)
    logger.info(f"Loaded checkpoint {path} ({model.variant}, d_model={model.settings.d_model})")
    return model, adam_state
