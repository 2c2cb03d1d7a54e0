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

"""Evaluation of trained models on full-modality subjects.

Per-stage probabilities are computed once per subject and cached in a
ScoredCohort; the progressive policy and any number of thresholds are then
applied to the cached scores.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
import torch

from progdx.core.checkpoint import Checkpoint, model_from_checkpoint
from progdx.core.cohort import SubjectRecord
from progdx.core.exceptions import CohortValidationError, ConfigurationError
from progdx.core.metrics import EvalReport, build_report
from progdx.core.model import CohortTensors, ProgressiveDiagnosisModel
from progdx.core.progressive import PolicyConfig, StageDecision, decide_trajectory


@dataclass
class ScoredCohort:
    """Cached per-stage probabilities of a set of subjects."""

    ids: list[str]
    labels: npt.NDArray[np.int64]
    stage_probs: npt.NDArray[np.float64]

    def trajectories(self, policy: PolicyConfig) -> dict[str, list[StageDecision]]:
        """Progressive decisions per subject id."""
        probs = torch.from_numpy(self.stage_probs)
        return {sid: decide_trajectory(probs[i], policy) for i, sid in enumerate(self.ids)}

    def decision_stages(self, policy: PolicyConfig) -> npt.NDArray[np.int64]:
        return np.array(
            [trajectory[-1].stage for trajectory in self.trajectories(policy).values()], dtype=np.int64
        )

    def report(self, policy: PolicyConfig, score_source: str = "decision") -> EvalReport:
        theta = policy.thresholds[0] if policy.progressive else None
        return build_report(
            self.labels, self.stage_probs, self.decision_stages(policy), theta, score_source
        )


def require_full_modalities(records: Sequence[SubjectRecord]) -> None:
    """Raise CohortValidationError for the first subject without tabular, MRI and PET."""
    for record in records:
        if not record.has_full_modalities:
            raise CohortValidationError("evaluation subjects need tabular data, MRI and PET", record.id)


def score_tensors(model: ProgressiveDiagnosisModel, tensors: CohortTensors) -> ScoredCohort:
    """Score prepared full-modality subjects at every stage."""
    probs = model.score_stages(tensors)
    return ScoredCohort(
        ids=list(tensors.ids),
        labels=tensors.labels.numpy().astype(np.int64),
        stage_probs=probs.to(torch.float64).numpy(),
    )


def score_cohort(model: ProgressiveDiagnosisModel, records: Sequence[SubjectRecord]) -> ScoredCohort:
    """Score raw records.

    Raises:
        CohortValidationError: If a subject is missing a modality
    """
    require_full_modalities(records)
    return score_tensors(model, model.prepare(records))


def evaluate_model(
    model: ProgressiveDiagnosisModel,
    tensors: CohortTensors,
    policy: PolicyConfig,
    score_source: str = "decision",
) -> EvalReport:
    return score_tensors(model, tensors).report(policy, score_source)


def _policy_for(checkpoint: Checkpoint, theta: float | None) -> PolicyConfig:
    policy = checkpoint.config.effective_policy
    return policy.with_theta(theta) if theta is not None else policy


def evaluate(checkpoint: Checkpoint, records: Sequence[SubjectRecord], theta: float | None = None) -> EvalReport:
    """Run progressive inference over full-modality subjects and report metrics.

    Args:
        checkpoint: Trained checkpoint
        records: Test subjects, each with tabular data, MRI and PET
        theta: Threshold for stages 1 and 2 (default: the checkpoint's policy)

    Raises:
        CohortValidationError: If a subject is missing a modality
    """
    model = model_from_checkpoint(checkpoint)
    scored = score_cohort(model, records)
    return scored.report(_policy_for(checkpoint, theta), checkpoint.config.score_source)


def sweep_threshold(
    checkpoint: Checkpoint, records: Sequence[SubjectRecord], thetas: Sequence[float]
) -> list[EvalReport]:
    """One report per threshold; the model is evaluated once.

    Raises:
        ConfigurationError: If a threshold lies outside [0, 1]
        CohortValidationError: If a subject is missing a modality
    """
    for theta in thetas:
        if not 0.0 <= theta <= 1.0:
            raise ConfigurationError("theta", f"must lie in [0, 1], got {theta}")
    scored = score_cohort(model_from_checkpoint(checkpoint), records)
    return [
        scored.report(_policy_for(checkpoint, theta), checkpoint.config.score_source) for theta in thetas
    ]


def reports_table(reports: Sequence[EvalReport], index: Sequence[str], index_name: str = "run") -> pd.DataFrame:
    """Headline columns of several reports as a DataFrame."""
    frame = pd.DataFrame([r.row() for r in reports], index=pd.Index(list(index), name=index_name))
    return frame.round(2)


def write_csv(table: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path)
    return path
