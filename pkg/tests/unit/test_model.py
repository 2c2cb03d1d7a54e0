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

"""Tests for the model module."""

import math

import numpy as np
import pytest
import torch

from progdx.core.cohort import SubjectRecord
from progdx.core.exceptions import ConfigurationError, InputError, ShapeError
from progdx.core.fusion_align import ConcatFusion, FusionModule
from progdx.core.guidelines import guideline_corpus
from progdx.core.model import (
    AblationFlags,
    ModelConfig,
    ProgressiveDiagnosisModel,
    prepare_tensors,
)
from progdx.core.progressive import PolicyConfig, total_loss


class TestModelConfig:
    """Tests for ModelConfig."""

    def test_defaults_are_valid(self) -> None:
        """The default dimensions should fit together."""
        ModelConfig().validate()

    def test_adapter_must_end_at_d_a(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            ModelConfig(adapter_widths=(512, 256, 64)).validate()

    def test_split_must_add_up(self) -> None:
        """Should raise ConfigurationError when d_c + d_s != d_a."""
        with pytest.raises(ConfigurationError):
            ModelConfig(d_c=32).validate()

    def test_from_dict_lists_become_tuples(self) -> None:
        """Lists from config files should become tuples."""
        config = ModelConfig.from_dict({"volume_shape": [8, 8, 8]})
        assert config.volume_shape == (8, 8, 8)

    def test_from_dict_unknown_key(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            ModelConfig.from_dict({"depth": 3})


class TestAblationFlags:
    """Tests for AblationFlags."""

    def test_full_label(self) -> None:
        """No flags should be labelled "full"."""
        assert AblationFlags().label == "full"

    def test_combined_label(self) -> None:
        """Enabled flags should join with '+'."""
        assert AblationFlags(no_alignment=True, no_fusion=True).label == "no_alignment+no_fusion"

    def test_from_dict_unknown_key(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            AblationFlags.from_dict({"no_text": True})


class TestPrepareTensors:
    """Tests for prepare_tensors."""

    def test_masks(
        self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord, tabular_only_record: SubjectRecord
    ) -> None:
        """Masks should mirror the available texts and volumes."""
        batch = tiny_model.prepare([full_record, tabular_only_record])
        assert batch.ids == ["S00001", "S00002"]
        assert batch.text_mask.tolist() == [[True, True, True], [True, True, False]]
        assert batch.mri_mask.tolist() == [True, False]
        assert batch.pet_mask.tolist() == [True, False]
        assert float(batch.mri[1].abs().sum()) == 0.0
        assert list(batch.tiers) == [3, 1]

    def test_wrong_volume_shape(self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord) -> None:
        """Should raise ShapeError."""
        with pytest.raises(ShapeError):
            prepare_tensors([full_record], tiny_model.text_encoder, 3, (8, 8, 8))

    def test_empty(self, tiny_model: ProgressiveDiagnosisModel) -> None:
        """Should raise InputError."""
        with pytest.raises(InputError):
            tiny_model.prepare([])

    def test_unknown_template(self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            prepare_tensors([full_record], tiny_model.text_encoder, 4, (4, 4, 4))


class TestProgressiveDiagnosisModel:
    """Tests for the assembled model."""

    def test_separate_volume_encoders(self, tiny_model: ProgressiveDiagnosisModel) -> None:
        """MRI and PET should not share weights."""
        mri = {id(p) for p in tiny_model.mri_encoder.parameters()}
        pet = {id(p) for p in tiny_model.pet_encoder.parameters()}
        assert not mri & pet

    def test_forward_shapes(
        self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord, tabular_only_record: SubjectRecord
    ) -> None:
        """Stage rows and outputs should cover only subjects with the modality."""
        outputs = tiny_model.forward_batch(tiny_model.prepare([full_record, tabular_only_record]))
        assert [r.tolist() for r in outputs.stage_rows] == [[0, 1], [0], [0]]
        assert [tuple(p.shape) for p in outputs.stage_probs] == [(2, 4), (1, 4), (1, 4)]
        assert [tuple(f.shape) for f in outputs.stage_features] == [(2, 8), (1, 8), (1, 8)]
        for probs in outputs.stage_probs:
            torch.testing.assert_close(probs.sum(dim=-1), torch.ones(probs.shape[0]))
        assert outputs.pairs is not None
        assert len(outputs.pairs) == 3

    def test_loss_is_differentiable(self, tiny_model: ProgressiveDiagnosisModel, tiny_cohort: list[SubjectRecord]) -> None:
        """Every trainable block should receive a gradient."""
        outputs = tiny_model.forward_batch(tiny_model.prepare(tiny_cohort[:16]))
        breakdown = total_loss(outputs, PolicyConfig())
        assert breakdown.first_non_finite() is None
        breakdown.total.backward()
        for name in ("adapters", "disentangler", "stage1", "fusion", "criteria"):
            block = getattr(tiny_model, name)
            assert any(p.grad is not None for p in block.parameters()), name

    def test_score_stages_nan_for_missing(
        self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord, tabular_only_record: SubjectRecord
    ) -> None:
        """Stages without their modality should be NaN."""
        scores = tiny_model.score_stages(tiny_model.prepare([full_record, tabular_only_record]))
        assert scores.shape == (2, 3, 4)
        assert not torch.isnan(scores[0]).any()
        assert not torch.isnan(scores[1, 0]).any()
        assert torch.isnan(scores[1, 1:]).all()

    def test_score_stages_chunking(self, tiny_model: ProgressiveDiagnosisModel, tiny_cohort: list[SubjectRecord]) -> None:
        """Chunk size should not change the scores."""
        batch = tiny_model.prepare(tiny_cohort[:12])
        whole = tiny_model.score_stages(batch)
        chunked = tiny_model.score_stages(batch, chunk_size=5)
        torch.testing.assert_close(whole, chunked, equal_nan=True)

    def test_stage_probabilities_match_batch_scores(
        self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord, tabular_only_record: SubjectRecord
    ) -> None:
        """Single-subject inference should agree with batch scoring."""
        scores = tiny_model.score_stages(tiny_model.prepare([tabular_only_record, full_record]))
        for stage in (1, 2, 3):
            probs = tiny_model.stage_probabilities(full_record, stage)
            torch.testing.assert_close(probs, scores[1, stage - 1], atol=1e-5, rtol=1e-4)

    def test_stage_one_ignores_imaging(self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord) -> None:
        """Stage-1 probabilities should not depend on the volumes."""
        other = SubjectRecord(
            id=full_record.id,
            label=full_record.label,
            tabular=full_record.tabular,
            mri=np.zeros((4, 4, 4), dtype=np.float32),
            pet=np.ones((4, 4, 4), dtype=np.float32),
        )
        torch.testing.assert_close(
            tiny_model.stage_probabilities(full_record, 1), tiny_model.stage_probabilities(other, 1)
        )

    def test_restores_training_mode(self, tiny_model: ProgressiveDiagnosisModel, full_record: SubjectRecord) -> None:
        """Scoring should leave the model in the mode it found it."""
        tiny_model.train()
        tiny_model.stage_probabilities(full_record, 2)
        assert tiny_model.training


class TestAblatedModels:
    """Tests for architecture ablations."""

    def test_no_disentangle(self, tiny_model_config: ModelConfig, tiny_cohort: list[SubjectRecord]) -> None:
        """Should drop the disentangler and its loss terms."""
        model = ProgressiveDiagnosisModel.build(
            tiny_model_config, AblationFlags(no_disentangle=True), corpus=guideline_corpus()
        )
        assert model.disentangler is None
        outputs = model.forward_batch(model.prepare(tiny_cohort[:8]))
        assert outputs.pairs is None
        terms = total_loss(outputs, PolicyConfig()).terms
        assert "orthogonal" not in terms
        assert "mi" not in terms
        assert math.isfinite(float(sum(terms.values())))

    def test_no_fusion(self, tiny_model_config: ModelConfig) -> None:
        """Should fuse by concatenation."""
        model = ProgressiveDiagnosisModel.build(tiny_model_config, AblationFlags(no_fusion=True))
        assert isinstance(model.fusion, ConcatFusion)

    def test_full_uses_attention(self, tiny_model: ProgressiveDiagnosisModel) -> None:
        """The full model should fuse with attention."""
        assert isinstance(tiny_model.fusion, FusionModule)
