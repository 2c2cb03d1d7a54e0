# progdx - Progressive single- to multi-modality sub-type diagnosis
# Copyright (C) 2026 progdx contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Checkpoint container.

Layout (all integers little-endian):

    magic       8 bytes  b"PGDXCKPT"
    version     u32
    meta_len    u64, then meta_len bytes of UTF-8 JSON metadata
    n_arrays    u32, then per array:
                  name_len u16, name (UTF-8)
                  ndim u8, ndim x u64 dims
                  float32 data
    digest      32 bytes SHA-256 of everything above
"""

import base64
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import torch

from progdx.core.config import TrainConfig
from progdx.core.exceptions import CheckpointIntegrityError, CheckpointVersionError
from progdx.core.guidelines import guideline_corpus
from progdx.core.model import ProgressiveDiagnosisModel

MAGIC = b"PGDXCKPT"
FORMAT_VERSION = 1
_DIGEST_SIZE = 32

Array = npt.NDArray[np.float32]


@dataclass
class Checkpoint:
    """Trained parameters plus everything needed to rebuild and audit the run."""

    config: TrainConfig
    arrays: dict[str, Array]
    epoch: int = 0
    best_epoch: int = 0
    rng_state: dict[str, Any] = field(default_factory=dict)
    history: list[dict[str, Any]] = field(default_factory=list)

    @classmethod
    def from_model(
        cls,
        model: ProgressiveDiagnosisModel,
        config: TrainConfig,
        epoch: int = 0,
        best_epoch: int = 0,
        rng_state: dict[str, Any] | None = None,
        history: list[dict[str, Any]] | None = None,
    ) -> "Checkpoint":
        arrays = {
            name: tensor.detach().cpu().to(torch.float32).numpy().copy()
            for name, tensor in model.state_dict().items()
        }
        return cls(config, arrays, epoch, best_epoch, rng_state or {}, history or [])

    def metadata(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "epoch": self.epoch,
            "best_epoch": self.best_epoch,
            "rng_state": self.rng_state,
            "history": self.history,
        }


def torch_rng_state() -> dict[str, Any]:
    """Current global torch generator state, JSON-serializable."""
    return {"torch": base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode("ascii")}


def restore_torch_rng_state(state: dict[str, Any]) -> None:
    if "torch" in state:
        raw = np.frombuffer(base64.b64decode(state["torch"]), dtype=np.uint8).copy()
        torch.set_rng_state(torch.from_numpy(raw))


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    meta = json.dumps(checkpoint.metadata(), sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(meta)), meta]
    parts.append(struct.pack("<I", len(checkpoint.arrays)))
    for name, array in checkpoint.arrays.items():
        encoded_name = name.encode("utf-8")
        data = np.ascontiguousarray(array, dtype="<f4")
        parts.append(struct.pack("<H", len(encoded_name)))
        parts.append(encoded_name)
        parts.append(struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        parts.append(data.tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, data: bytes, path: str) -> None:
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointIntegrityError(self.path, "unexpected end of data")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, path: str = "<bytes>") -> Checkpoint:
    """Parse checkpoint bytes.

    Raises:
        CheckpointIntegrityError: If the data is truncated, corrupt or fails the digest
        CheckpointVersionError: If the format version is not supported
    """
    if len(data) < len(MAGIC) + 4 + _DIGEST_SIZE or not data.startswith(MAGIC):
        raise CheckpointIntegrityError(path, "not a progdx checkpoint or truncated header")
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointIntegrityError(path, "SHA-256 digest mismatch")

    reader = _Reader(body, path)
    reader.take(len(MAGIC))
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(path, version, FORMAT_VERSION)

    (meta_len,) = reader.unpack("<Q")
    try:
        meta = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointIntegrityError(path, f"metadata is not valid JSON: {e}") from e

    arrays: dict[str, Array] = {}
    (count,) = reader.unpack("<I")
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}Q") if ndim else ()
        size = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(reader.take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if reader.offset != len(body):
        raise CheckpointIntegrityError(path, "trailing bytes after the last array")

    return Checkpoint(
        config=TrainConfig.from_dict(meta["config"]),
        arrays=arrays,
        epoch=int(meta.get("epoch", 0)),
        best_epoch=int(meta.get("best_epoch", 0)),
        rng_state=dict(meta.get("rng_state", {})),
        history=list(meta.get("history", [])),
    )


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    """Write a checkpoint file, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Read and verify a checkpoint file.

    Raises:
        CheckpointIntegrityError: If the file is missing, truncated or corrupt
        CheckpointVersionError: If the format version is not supported
    """
    if not path.exists():
        raise CheckpointIntegrityError(str(path), "file does not exist")
    return decode_checkpoint(path.read_bytes(), str(path))


def model_from_checkpoint(checkpoint: Checkpoint) -> ProgressiveDiagnosisModel:
    """Rebuild the model of a checkpoint and load its parameters."""
    config = checkpoint.config
    corpus_path = Path(config.guideline_corpus) if config.guideline_corpus else None
    model = ProgressiveDiagnosisModel.build(
        config.model, config.ablation, guideline_corpus(corpus_path), config.template_id
    )
    state = {name: torch.from_numpy(array.copy()) for name, array in checkpoint.arrays.items()}
    model.load_state_dict(state, strict=True)
    model.eval()
    return model
