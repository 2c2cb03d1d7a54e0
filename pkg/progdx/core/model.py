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

"""The progressive diagnosis model: encoders, disentanglement, fusion and criteria.

Stage k of a subject fuses the stage features f^1..f^k and scores the fused
vector against the sub-type criteria. During training every stage a subject
has the modalities for is computed; the policy only chooses the loss branch.
"""

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from torch import Tensor, nn

from progdx.core.cohort import SubjectRecord
from progdx.core.disentangle import DisentangledPair, Stage1Projector, TextDisentangler
from progdx.core.encoders import (
    HashingTextEncoder,
    TextAdapterBank,
    VolumeEncoder,
    load_external_embeddings,
)
from progdx.core.exceptions import ConfigurationError, InputError, ShapeError
from progdx.core.fusion_align import ConcatFusion, CriteriaEncoder, FusionModule, contrastive_scores
from progdx.core.guidelines import GuidelineCriterion, guideline_corpus
from progdx.core.progressive import N_STAGES, BatchOutputs
from progdx.core.textualize import TEXT_COMPONENTS, check_template_id, textualize

N_CLASSES = 4


@dataclass
class ModelConfig:
    """Dimensions and architecture switches."""

    d_text: int = 512
    adapter_widths: tuple[int, ...] = (512, 256, 256, 128)
    d_a: int = 128
    d_c: int = 64
    d_s: int = 64
    disentangle_hidden: int = 128
    d: int = 128
    heads: int = 4
    ffw_width: int = 512
    n_queries: int = 1
    encoder_depth: int = 3
    encoder_channels: int = 8
    volume_shape: tuple[int, int, int] = (16, 16, 16)
    standardize_volumes: bool = True
    shared_adapter: bool = True
    tau: float = 0.1
    external_embeddings: str | None = None

    def validate(self) -> None:
        """Raise ConfigurationError if the dimensions do not fit together."""
        if self.adapter_widths[0] != self.d_text:
            raise ConfigurationError("adapter_widths", f"must start at d_text = {self.d_text}")
        if self.adapter_widths[-1] != self.d_a:
            raise ConfigurationError("adapter_widths", f"must end at d_a = {self.d_a}")
        if self.d_c + self.d_s != self.d_a:
            raise ConfigurationError("d_c/d_s", f"d_c + d_s must equal d_a = {self.d_a}")
        if self.d % self.heads != 0:
            raise ConfigurationError("heads", f"{self.heads} heads do not divide d = {self.d}")
        if self.tau <= 0:
            raise ConfigurationError("tau", f"temperature must be positive, got {self.tau}")
        if len(self.volume_shape) != 3 or any(s <= 0 for s in self.volume_shape):
            raise ConfigurationError("volume_shape", f"needs three positive sizes, got {self.volume_shape}")
        if min(self.d_text, self.d, self.ffw_width, self.disentangle_hidden, self.n_queries) <= 0:
            raise ConfigurationError("model", "dimensions must be positive")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError("model", f"unknown keys {sorted(unknown)}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        config = cls(**values)
        config.validate()
        return config


@dataclass
class AblationFlags:
    """Components switched off for an ablation run."""

    no_disentangle: bool = False
    no_alignment: bool = False
    no_progressive: bool = False
    no_fusion: bool = False

    def enabled(self) -> list[str]:
        return [name for name, on in asdict(self).items() if on]

    @property
    def label(self) -> str:
        """Short run label, e.g. "full" or "no_fusion+no_alignment"."""
        return "+".join(self.enabled()) or "full"

    def to_dict(self) -> dict[str, bool]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AblationFlags":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError("ablation", f"unknown keys {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in data.items()})


@dataclass
class CohortTensors:
    """Model inputs for a list of subjects.

    Absent text components and volumes are zero-filled and flagged by masks.
    """

    ids: list[str]
    labels: Tensor
    text_embeddings: Tensor
    text_mask: Tensor
    mri: Tensor
    mri_mask: Tensor
    pet: Tensor
    pet_mask: Tensor
    tiers: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, rows: Sequence[int] | np.ndarray | Tensor) -> "CohortTensors":
        """Subset by row positions."""
        idx = torch.as_tensor(np.asarray(rows, dtype=np.int64))
        return CohortTensors(
            ids=[self.ids[int(i)] for i in idx],
            labels=self.labels[idx],
            text_embeddings=self.text_embeddings[idx],
            text_mask=self.text_mask[idx],
            mri=self.mri[idx],
            mri_mask=self.mri_mask[idx],
            pet=self.pet[idx],
            pet_mask=self.pet_mask[idx],
            tiers=self.tiers[idx.numpy()],
        )


def prepare_tensors(
    records: Sequence[SubjectRecord],
    text_encoder: HashingTextEncoder,
    template_id: int,
    volume_shape: tuple[int, int, int],
) -> CohortTensors:
    """Textualize, encode and stack a list of subjects.

    The text encoder is frozen, so embeddings are computed once here rather
    than on every forward pass.

    Raises:
        InputError: If records is empty
        ConfigurationError: If template_id is unknown
    """
    if not records:
        raise InputError("no subjects to prepare")
    check_template_id(template_id)

    n = len(records)
    n_text = len(TEXT_COMPONENTS)
    text = torch.zeros(n, n_text, text_encoder.dim)
    text_mask = torch.zeros(n, n_text, dtype=torch.bool)
    mri = torch.zeros(n, *volume_shape)
    pet = torch.zeros(n, *volume_shape)
    for i, record in enumerate(records):
        for volume in (record.mri, record.pet):
            if volume is not None and tuple(volume.shape) != tuple(volume_shape):
                raise ShapeError(f"volume of subject '{record.id}'", tuple(volume_shape), tuple(volume.shape))
        for j, component in enumerate(textualize(record, template_id).components()):
            if component is not None:
                text[i, j] = text_encoder.encode(component)
                text_mask[i, j] = True
        if record.mri is not None:
            mri[i] = torch.from_numpy(np.ascontiguousarray(record.mri, dtype=np.float32))
        if record.pet is not None:
            pet[i] = torch.from_numpy(np.ascontiguousarray(record.pet, dtype=np.float32))

    return CohortTensors(
        ids=[r.id for r in records],
        labels=torch.tensor([int(r.label) for r in records], dtype=torch.long),
        text_embeddings=text,
        text_mask=text_mask,
        mri=mri,
        mri_mask=torch.tensor([r.has_mri for r in records], dtype=torch.bool),
        pet=pet,
        pet_mask=torch.tensor([r.has_pet for r in records], dtype=torch.bool),
        tiers=np.array([r.tier for r in records], dtype=np.int64),
    )


def build_text_encoder(config: ModelConfig) -> HashingTextEncoder:
    """Text encoder for a model config, with external embeddings when configured."""
    external = None
    if config.external_embeddings:
        external = load_external_embeddings(Path(config.external_embeddings), config.d_text)
    return HashingTextEncoder(config.d_text, external)


class ProgressiveDiagnosisModel(nn.Module):
    """All trainable blocks of the three-stage classifier."""

    def __init__(
        self,
        config: ModelConfig,
        criteria_embeddings: Tensor,
        flags: AblationFlags | None = None,
        text_encoder: HashingTextEncoder | None = None,
        template_id: int = 3,
    ) -> None:
        """Initialize the model.

        Args:
            config: Model dimensions
            criteria_embeddings: Frozen (4, d_text) embeddings of the criteria
            flags: Ablation switches that change the architecture
            text_encoder: Frozen encoder used when scoring raw records
            template_id: Textualization template used when scoring raw records
        """
        super().__init__()
        config.validate()
        self.config = config
        self.flags = flags or AblationFlags()
        self.text_encoder = text_encoder or build_text_encoder(config)
        self.template_id = template_id

        self.adapters = TextAdapterBank(config.adapter_widths, shared=config.shared_adapter)
        self.disentangler = (
            None
            if self.flags.no_disentangle
            else TextDisentangler(config.d_a, config.d_c, config.d_s, config.disentangle_hidden)
        )
        self.stage1 = Stage1Projector(config.d_a, config.d)
        self.mri_encoder = VolumeEncoder(
            config.volume_shape, config.d, config.encoder_depth, config.encoder_channels, config.standardize_volumes
        )
        self.pet_encoder = VolumeEncoder(
            config.volume_shape, config.d, config.encoder_depth, config.encoder_channels, config.standardize_volumes
        )
        self.fusion: nn.Module = (
            ConcatFusion(config.d)
            if self.flags.no_fusion
            else FusionModule(config.d, config.heads, config.ffw_width, config.n_queries)
        )
        self.criteria = CriteriaEncoder(criteria_embeddings, config.d)

    @classmethod
    def build(
        cls,
        config: ModelConfig,
        flags: AblationFlags | None = None,
        corpus: Sequence[GuidelineCriterion] | None = None,
        template_id: int = 3,
    ) -> "ProgressiveDiagnosisModel":
        """Create a freshly initialized model, encoding the criteria corpus."""
        text_encoder = build_text_encoder(config)
        criteria = corpus if corpus is not None else guideline_corpus()
        embeddings = text_encoder.encode_many([c.text for c in criteria])
        return cls(config, embeddings, flags, text_encoder, template_id)

    def prepare(self, records: Sequence[SubjectRecord]) -> CohortTensors:
        return prepare_tensors(records, self.text_encoder, self.template_id, self.config.volume_shape)

    def text_feature(self, batch: CohortTensors) -> tuple[Tensor, list[DisentangledPair] | None]:
        """Stage-1 feature and, unless ablated, the disentangled pairs."""
        adapted = self.adapters(batch.text_embeddings)
        if self.disentangler is None:
            return self.stage1.forward_plain(adapted, batch.text_mask), None
        pairs = self.disentangler.split_all(adapted)
        return self.stage1(pairs, batch.text_mask), pairs

    def head(self, features: Sequence[Tensor]) -> Tensor:
        """Fuse stage features and score them against the criteria."""
        fused = self.fusion(features)
        return contrastive_scores(fused, self.criteria(), self.config.tau)

    def forward_batch(self, batch: CohortTensors) -> BatchOutputs:
        """Compute every stage available to each subject of the batch."""
        size = len(batch)
        if size == 0:
            raise InputError("empty batch")
        rows1 = torch.arange(size)
        rows2 = torch.nonzero(batch.mri_mask).flatten()
        rows3 = torch.nonzero(batch.pet_mask).flatten()

        f1, pairs = self.text_feature(batch)
        empty = f1.new_zeros(0, self.config.d)
        f2 = self.mri_encoder(batch.mri[rows2]) if rows2.numel() else empty
        f3 = self.pet_encoder(batch.pet[rows3]) if rows3.numel() else empty
        pos3 = torch.searchsorted(rows2, rows3)

        no_probs = f1.new_zeros(0, N_CLASSES)
        probs1 = self.head([f1])
        probs2 = self.head([f1[rows2], f2]) if rows2.numel() else no_probs
        probs3 = self.head([f1[rows3], f2[pos3], f3]) if rows3.numel() else no_probs

        return BatchOutputs(
            labels=batch.labels,
            stage_rows=[rows1, rows2, rows3],
            stage_probs=[probs1, probs2, probs3],
            stage_features=[f1, f2, f3],
            text_mask=batch.text_mask,
            pairs=pairs,
        )

    @torch.no_grad()
    def score_stages(self, batch: CohortTensors, chunk_size: int = 256) -> Tensor:
        """Per-stage probabilities, (B, 3, 4); NaN where a stage's modality is missing."""
        was_training = self.training
        self.eval()
        scores = torch.full((len(batch), N_STAGES, N_CLASSES), float("nan"))
        for start in range(0, len(batch), chunk_size):
            rows = list(range(start, min(start + chunk_size, len(batch))))
            outputs = self.forward_batch(batch.index(rows))
            for k in range(N_STAGES):
                stage_rows = outputs.stage_rows[k]
                if stage_rows.numel():
                    scores[start + stage_rows, k] = outputs.stage_probs[k].to(scores.dtype)
        self.train(was_training)
        return scores

    @torch.no_grad()
    def stage_probabilities(self, record: SubjectRecord, stage: int) -> Tensor:
        """Probabilities of one subject at one stage, using only modalities up to that stage."""
        was_training = self.training
        self.eval()
        batch = self.prepare([record])
        f1, _ = self.text_feature(batch)
        features = [f1]
        if stage >= 2:
            features.append(self.mri_encoder(batch.mri))
        if stage >= 3:
            features.append(self.pet_encoder(batch.pet))
        probs = self.head(features)[0]
        self.train(was_training)
        return probs
