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

"""Stage encoders.

- Stage 1: a frozen text encoder followed by a trainable 4-layer adapter
- Stages 2 and 3: small 3D convolutional encoders trained from scratch

The default text encoder hashes tokens and token bigrams into signed buckets
and L2-normalizes the result. Embeddings computed by an external biomedical
text encoder can be imported and take precedence over the hashed ones.
"""

import functools
import hashlib
import json
import re
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import torch
from torch import Tensor, nn

from progdx.core.exceptions import (
    ConfigNotFoundError,
    ConfigParseError,
    ConfigurationError,
    InputError,
    ShapeError,
)
from progdx.core.textualize import TEXT_COMPONENTS

_TOKEN_PATTERN = re.compile(r"[a-z0-9]+(?:\.[0-9]+)?|[^\sa-z0-9]")

# Typographic apostrophes tokenize like the ASCII one
_APOSTROPHES = str.maketrans({"\u2019": "'", "\u2018": "'", "\u02bc": "'"})

DEFAULT_CACHE_SIZE = 65536


def load_external_embeddings(path: Path, dim: int) -> dict[str, Tensor]:
    """Load externally computed text embeddings.

    The file is JSON Lines of {"text": ..., "vector": [...]} objects.

    Args:
        path: Embedding file
        dim: Required vector length (the text embedding dimension)

    Returns:
        Map from text to a float32 vector

    Raises:
        ConfigNotFoundError: If the file does not exist
        ConfigParseError: If a line is not a text/vector object
        ConfigurationError: If a vector does not have length dim
    """
    if not path.exists():
        raise ConfigNotFoundError(str(path))

    table: dict[str, Tensor] = {}
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                text = str(entry["text"])
                vector = [float(v) for v in entry["vector"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ConfigParseError(str(path), f"line {line_number}: {e}") from e
            if len(vector) != dim:
                raise ConfigurationError(
                    "external_embeddings",
                    f"vector for {text!r} has length {len(vector)}, expected {dim}",
                )
            table[text] = torch.tensor(vector, dtype=torch.float32)
    return table


class HashingTextEncoder:
    """Frozen text encoder: signed feature hashing of tokens and bigrams.

    Has no trainable parameters. The most recent cache_size embeddings are
    memoised; the encoder is a pure function of the text, so call order never
    matters.
    """

    def __init__(
        self,
        dim: int = 512,
        external: dict[str, Tensor] | None = None,
        cache_size: int = DEFAULT_CACHE_SIZE,
    ) -> None:
        """Initialize the encoder.

        Args:
            dim: Embedding dimension
            external: Precomputed embeddings consulted before hashing
            cache_size: How many hashed embeddings to keep
        """
        if dim <= 0:
            raise ConfigurationError("d_text", f"must be positive, got {dim}")
        self.dim = dim
        self.external = dict(external or {})
        for text, vector in self.external.items():
            if vector.shape != (dim,):
                raise ConfigurationError(
                    "external_embeddings", f"vector for {text!r} has shape {tuple(vector.shape)}, expected ({dim},)"
                )
        self._cached_embed = functools.lru_cache(maxsize=cache_size)(self._hash_embed)

    @staticmethod
    def tokenize(text: str) -> list[str]:
        return _TOKEN_PATTERN.findall(text.translate(_APOSTROPHES).lower())

    def _bucket(self, feature: str) -> tuple[int, float]:
        digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        return value % self.dim, 1.0 if (value >> 63) & 1 else -1.0

    def _hash_embed(self, text: str) -> Tensor:
        tokens = self.tokenize(text)
        features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:], strict=False)]
        vector = np.zeros(self.dim, dtype=np.float64)
        for feature in features:
            index, sign = self._bucket(feature)
            vector[index] += sign
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            # Every feature cancelled out; fall back to the first bucket.
            vector[self._bucket(text)[0]] = 1.0
            norm = 1.0
        return torch.from_numpy(vector / norm).to(torch.float32)

    def encode(self, text: str) -> Tensor:
        """Embed one text.

        Args:
            text: Non-empty text

        Returns:
            Vector of length dim (unit L2 norm unless it came from the external table)

        Raises:
            InputError: If text is empty or whitespace
        """
        if not text or not text.strip():
            raise InputError("cannot encode an empty text")
        if text in self.external:
            return self.external[text].clone()
        return self._cached_embed(text).clone()

    def encode_many(self, texts: Sequence[str]) -> Tensor:
        """Embed several texts into a (len(texts), dim) matrix."""
        if not texts:
            return torch.zeros(0, self.dim)
        return torch.stack([self.encode(t) for t in texts])


class Adapter(nn.Module):
    """Trainable 4-layer perceptron mapping text embeddings to adapted features."""

    def __init__(self, widths: Sequence[int] = (512, 256, 256, 128)) -> None:
        """Initialize the adapter.

        Args:
            widths: Boundary widths in -> h1 -> h2 -> h3 -> out. Four values
                (in, h1, h2, out) reuse h2 for the third hidden layer.
        """
        super().__init__()
        widths = list(widths)
        if len(widths) == 4:
            widths = [widths[0], widths[1], widths[2], widths[2], widths[3]]
        if len(widths) != 5:
            raise ConfigurationError("adapter_widths", f"needs 4 or 5 widths, got {len(widths)}")
        layers: list[nn.Module] = []
        for i in range(4):
            layers.append(nn.Linear(widths[i], widths[i + 1]))
            if i < 3:
                layers.append(nn.ReLU())
        self.net = nn.Sequential(*layers)
        self.in_dim = widths[0]
        self.out_dim = widths[-1]

    @property
    def layer_count(self) -> int:
        return sum(isinstance(m, nn.Linear) for m in self.net)

    def forward(self, e: Tensor) -> Tensor:
        if e.shape[-1] != self.in_dim:
            raise ShapeError("adapter input", self.in_dim, e.shape[-1])
        return self.net(e)


class TextAdapterBank(nn.Module):
    """Adapters for the three text components, shared or one per component."""

    def __init__(self, widths: Sequence[int], shared: bool = True) -> None:
        super().__init__()
        self.shared = shared
        count = 1 if shared else len(TEXT_COMPONENTS)
        self.adapters = nn.ModuleList(Adapter(widths) for _ in range(count))

    @property
    def out_dim(self) -> int:
        first = self.adapters[0]
        assert isinstance(first, Adapter)
        return first.out_dim

    def forward(self, embeddings: Tensor) -> Tensor:
        """Adapt a (B, 3, d_text) stack of component embeddings to (B, 3, d_a)."""
        if embeddings.dim() != 3 or embeddings.shape[1] != len(TEXT_COMPONENTS):
            raise ShapeError("text embedding stack", (-1, 3, -1), tuple(embeddings.shape))
        if self.shared:
            return self.adapters[0](embeddings)
        return torch.stack(
            [adapter(embeddings[:, i]) for i, adapter in enumerate(self.adapters)], dim=1
        )


def standardize_volume(volume: Tensor, eps: float = 1e-6) -> Tensor:
    """Z-score each volume of a (B, D, H, W) batch over its own voxels."""
    flat = volume.flatten(start_dim=1)
    mean = flat.mean(dim=1)
    std = flat.std(dim=1, unbiased=False)
    shape = (-1,) + (1,) * (volume.dim() - 1)
    return (volume - mean.view(shape)) / (std.view(shape) + eps)


class VolumeEncoder(nn.Module):
    """3D convolutional encoder for one imaging stage.

    Blocks of conv(3x3x3) - group norm - ReLU, channels doubling per block and
    stride 2 after the first block, then global average pooling and a linear
    projection to the shared stage dimension.
    """

    def __init__(
        self,
        volume_shape: Sequence[int],
        out_dim: int = 128,
        depth: int = 3,
        base_channels: int = 8,
        standardize: bool = True,
    ) -> None:
        super().__init__()
        if depth < 1 or base_channels < 1:
            raise ConfigurationError("encoder_depth", "depth and base_channels must be positive")
        self.volume_shape = tuple(int(s) for s in volume_shape)
        self.standardize = standardize

        blocks: list[nn.Module] = []
        in_channels = 1
        for i in range(depth):
            out_channels = base_channels * 2**i
            blocks += [
                nn.Conv3d(in_channels, out_channels, kernel_size=3, stride=1 if i == 0 else 2, padding=1),
                nn.GroupNorm(1, out_channels),
                nn.ReLU(),
            ]
            in_channels = out_channels
        self.features = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool3d(1)
        self.project = nn.Linear(in_channels, out_dim)
        self.out_dim = out_dim

    def forward(self, volume: Tensor) -> Tensor:
        """Encode a (B, D, H, W) batch, or a single (D, H, W) volume, to (B, d) or (d,)."""
        single = volume.dim() == 3
        if single:
            volume = volume.unsqueeze(0)
        if volume.dim() != 4 or tuple(volume.shape[1:]) != self.volume_shape:
            raise ShapeError("volume", self.volume_shape, tuple(volume.shape[-3:]))
        if self.standardize:
            volume = standardize_volume(volume)
        x = self.features(volume.unsqueeze(1))
        out = self.project(self.pool(x).flatten(start_dim=1))
        return out.squeeze(0) if single else out
