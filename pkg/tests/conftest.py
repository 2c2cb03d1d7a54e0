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

"""Pytest configuration and fixtures for progdx tests."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import toml
import torch

from progdx.core.checkpoint import Checkpoint
from progdx.core.cohort import SubjectRecord, SubType, TabularRecord, save_cohort
from progdx.core.config import TrainConfig
from progdx.core.guidelines import guideline_corpus
from progdx.core.model import ModelConfig, ProgressiveDiagnosisModel
from progdx.core.progressive import PolicyConfig
from progdx.core.synthetic import SynthConfig, synthesize_cohort
from progdx.core.trainer import train

TINY_SHAPE = (4, 4, 4)


@pytest.fixture
def project_root() -> Path:
    """Get the project root directory."""
    return Path(__file__).parent.parent


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    """Model small enough to train in a second on CPU."""
    return ModelConfig(
        d_text=32,
        adapter_widths=(32, 16, 16, 8),
        d_a=8,
        d_c=4,
        d_s=4,
        disentangle_hidden=8,
        d=8,
        heads=2,
        ffw_width=16,
        encoder_depth=2,
        encoder_channels=2,
        volume_shape=TINY_SHAPE,
    )


@pytest.fixture
def tiny_train_config(tiny_model_config: ModelConfig) -> TrainConfig:
    """Two quick epochs with a learning rate large enough to move."""
    return TrainConfig(
        learning_rate=0.05,
        momentum=0.9,
        epochs=2,
        batch_size=16,
        seed=0,
        model=tiny_model_config,
        policy=PolicyConfig(),
    )


@pytest.fixture
def tiny_synth_config() -> SynthConfig:
    """80 subjects with generous MRI and PET availability."""
    return SynthConfig(
        n_subjects=80,
        volume_shape=TINY_SHAPE,
        availability=(1.0, 0.75, 0.6),
        signal_tabular=2.0,
        signal_mri=2.0,
        signal_pet=2.0,
    )


@pytest.fixture
def tiny_cohort(tiny_synth_config: SynthConfig) -> list[SubjectRecord]:
    """Synthetic cohort for the tiny configs."""
    return synthesize_cohort(tiny_synth_config, seed=7)


@pytest.fixture
def tiny_model(tiny_model_config: ModelConfig) -> ProgressiveDiagnosisModel:
    """Freshly initialized tiny model."""
    torch.manual_seed(0)
    return ProgressiveDiagnosisModel.build(tiny_model_config, corpus=guideline_corpus())


@pytest.fixture
def trained_checkpoint(tiny_cohort: list[SubjectRecord], tiny_train_config: TrainConfig) -> Checkpoint:
    """Checkpoint of a two-epoch run on the tiny cohort."""
    result = train(tiny_cohort, tiny_train_config)
    assert result.checkpoint is not None
    return result.checkpoint


@pytest.fixture
def full_record() -> SubjectRecord:
    """A subject with every tabular field, MRI and PET."""
    rng = np.random.default_rng(0)
    return SubjectRecord(
        id="S00001",
        label=SubType.TYPICAL_AD,
        tabular=TabularRecord(
            age=75,
            education=12,
            gender="female",
            heart_attack=False,
            hypertension=True,
            stroke=False,
            alcohol_abuse=False,
            psychiatric_disorder=False,
            blood_test=1.25,
            dementia_level=0.5,
        ),
        mri=rng.standard_normal(TINY_SHAPE).astype(np.float32),
        pet=rng.standard_normal(TINY_SHAPE).astype(np.float32),
    )


@pytest.fixture
def tabular_only_record(full_record: SubjectRecord) -> SubjectRecord:
    """A subject with tabular data only and no dementia level."""
    tabular = replace(full_record.tabular, dementia_level=None)
    return SubjectRecord(id="S00002", label=SubType.NORMAL_CONTROL, tabular=tabular)


@pytest.fixture
def tiny_project(tmp_path: Path, tiny_cohort: list[SubjectRecord], tiny_train_config: TrainConfig) -> Path:
    """Project directory with data/cohort.jsonl and tiny.toml for the tiny configs."""
    save_cohort(tiny_cohort, tmp_path / "data")
    (tmp_path / "tiny.toml").write_text(toml.dumps(tiny_train_config.to_dict()))
    return tmp_path
