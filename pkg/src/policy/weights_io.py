"""
Portable policy weight file (*.dsamw).

    line 1   DSAMW
    line 2   one-line JSON header (WeightFileHeader)
    rest     little-endian float32 tensors, concatenated in header order

The layout is documented in docs/WEIGHT_FILE_FORMAT.md.
"""
import logging
import os
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from src.errors import WeightFileError
from src.models.config import ActionScaling, ObservationConfig
from src.policy.network import FORMAT_VERSION, PolicyWeights
from src.policy.observation import observation_layout

logger = logging.getLogger(__name__)

MAGIC = b"DSAMW\n"
_DTYPE = np.dtype("<f4")


class TensorEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    name: str
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


class WeightFileHeader(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    format_version: int
    tensors: List[TensorEntry]
    actions: ActionScaling
    observation: ObservationConfig
    observation_blocks: List[Tuple[str, int]]
    payload_bytes: int


def _named_tensors(weights: PolicyWeights) -> List[Tuple[str, np.ndarray]]:
    named = []
    for index, (W, b) in enumerate(weights.layers):
        named.append((f"layer{index}.weight", W))
        named.append((f"layer{index}.bias", b))
    named += [("log_std", weights.log_std), ("obs_mean", weights.obs_mean), ("obs_var", weights.obs_var)]
    return named


def encode_weights(weights: PolicyWeights) -> bytes:
    named = _named_tensors(weights)
    payload = b"".join(np.ascontiguousarray(t, dtype=_DTYPE).tobytes() for _, t in named)
    header = WeightFileHeader(
        format_version=weights.format_version,
        tensors=[TensorEntry(name=name, shape=tuple(t.shape)) for name, t in named],
        actions=weights.actions,
        observation=weights.observation,
        observation_blocks=observation_layout(weights.observation),
        payload_bytes=len(payload),
    )
    return MAGIC + header.model_dump_json().encode("utf-8") + b"\n" + payload


def decode_weights(blob: bytes, path: Union[str, Path, None] = None) -> PolicyWeights:
    """
    Parse a weight file image.

    Raises:
        WeightFileError: on bad magic, header, version, truncation, shape or non-finite data
    """
    source = str(path) if path is not None else None
    if not blob.startswith(MAGIC):
        raise WeightFileError("not a DSAMW weight file (bad magic)", source)
    end = blob.find(b"\n", len(MAGIC))
    if end < 0:
        raise WeightFileError("truncated header", source)
    try:
        header = WeightFileHeader.model_validate_json(blob[len(MAGIC):end])
    except (ValidationError, ValueError) as exc:
        raise WeightFileError(f"invalid header: {exc}", source) from exc
    if header.format_version != FORMAT_VERSION:
        raise WeightFileError(
            f"unsupported format version {header.format_version} (expected {FORMAT_VERSION})", source
        )

    payload = blob[end + 1:]
    expected = sum(t.size for t in header.tensors) * _DTYPE.itemsize
    if header.payload_bytes != expected:
        raise WeightFileError(f"header declares {header.payload_bytes} bytes, tensors need {expected}", source)
    if len(payload) != expected:
        raise WeightFileError(f"payload has {len(payload)} bytes, expected {expected} (truncated?)", source)

    tensors = {}
    offset = 0
    for entry in header.tensors:
        count = entry.size
        data = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=offset * _DTYPE.itemsize)
        tensors[entry.name] = data.astype(np.float32).reshape(entry.shape)
        offset += count

    try:
        layer_count = sum(1 for name in tensors if name.endswith(".weight"))
        layers = tuple(
            (tensors[f"layer{i}.weight"], tensors[f"layer{i}.bias"]) for i in range(layer_count)
        )
        return PolicyWeights(
            layers=layers,
            log_std=tensors["log_std"],
            obs_mean=tensors["obs_mean"],
            obs_var=tensors["obs_var"],
            actions=header.actions,
            observation=header.observation,
            format_version=header.format_version,
        )
    except KeyError as exc:
        raise WeightFileError(f"missing tensor {exc}", source) from exc
    except ValueError as exc:
        raise WeightFileError(str(exc), source) from exc


def save_weights(weights: PolicyWeights, path: Union[str, Path]) -> Path:
    """Write atomically (temp file + rename)."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(encode_weights(weights))
        os.replace(tmp, path)
    except OSError as exc:
        raise WeightFileError(f"cannot write weight file: {exc}", str(path)) from exc
    logger.info("saved policy weights to %s", path)
    return path


def load_weights(path: Union[str, Path]) -> PolicyWeights:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise WeightFileError(f"cannot read weight file: {exc}", str(path)) from exc
    weights = decode_weights(blob, path)
    logger.debug("loaded %s: hidden %s, obs dim %d", path, weights.hidden_sizes, weights.input_dim)
    return weights

