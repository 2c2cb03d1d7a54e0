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

"""Core modules for progdx."""

from progdx.core.cohort import SubjectRecord, SubType, load_cohort, save_cohort
from progdx.core.config import TrainConfig, load_train_config
from progdx.core.exceptions import (
    CheckpointError,
    CohortValidationError,
    ConfigurationError,
    CriticalTrainingError,
    InputError,
    ProgdxError,
    ShapeError,
    ValidationError,
)
from progdx.core.model import AblationFlags, ModelConfig, ProgressiveDiagnosisModel
from progdx.core.progressive import PolicyConfig, StageDecision, run_progressive_inference
from progdx.core.synthetic import SynthConfig, synthesize_cohort
from progdx.core.textualize import TextBundle, textualize

__all__ = [
    # Cohort
    "SubType",
    "SubjectRecord",
    "load_cohort",
    "save_cohort",
    # Config
    "TrainConfig",
    "load_train_config",
    # Exceptions
    "CheckpointError",
    "CohortValidationError",
    "ConfigurationError",
    "CriticalTrainingError",
    "InputError",
    "ProgdxError",
    "ShapeError",
    "ValidationError",
    # Model
    "AblationFlags",
    "ModelConfig",
    "ProgressiveDiagnosisModel",
    # Policy
    "PolicyConfig",
    "StageDecision",
    "run_progressive_inference",
    # Synthetic data
    "SynthConfig",
    "synthesize_cohort",
    # Textualization
    "TextBundle",
    "textualize",
]
