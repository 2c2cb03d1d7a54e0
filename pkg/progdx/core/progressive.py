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

"""Confidence-gated progressive classification.

At stage k the confidence C^k is the gap between the two highest sub-type
probabilities. A subject is diagnosed at the first stage whose confidence
reaches the threshold; stage 3 always decides. Training uses the matching
stage loss: the contrastive loss when confident (or at stage 3), otherwise
the negated confidence times a penalty.
"""

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Protocol

import torch
from torch import Tensor

from progdx.core.cohort import SubjectRecord, SubType
from progdx.core.disentangle import DisentangledPair, mi_penalty_total, orthogonal_loss
from progdx.core.exceptions import CohortValidationError, ConfigurationError, InputError
from progdx.core.fusion_align import alignment_loss, guideline_contrastive_loss

N_STAGES = 3


@dataclass
class PolicyConfig:
    """Thresholds and penalties of the progressive policy (stages 1 and 2)."""

    thresholds: tuple[float, float] = (0.3, 0.3)
    penalties: tuple[float, float] = (1.0, 1.5)
    gate_penalty_on_correct: bool = False
    progressive: bool = True

    def validate(self) -> None:
        """Raise ConfigurationError on out-of-range values."""
        if len(self.thresholds) != N_STAGES - 1 or len(self.penalties) != N_STAGES - 1:
            raise ConfigurationError("policy", "needs one threshold and one penalty for stages 1 and 2")
        for theta in self.thresholds:
            if not 0.0 <= theta <= 1.0:
                raise ConfigurationError("thresholds", f"must lie in [0, 1], got {theta}")
        for delta in self.penalties:
            if delta <= 0:
                raise ConfigurationError("penalties", f"must be positive, got {delta}")

    def threshold(self, stage: int) -> float:
        return self.thresholds[stage - 1]

    def penalty(self, stage: int) -> float:
        return self.penalties[stage - 1]

    def with_theta(self, theta: float) -> "PolicyConfig":
        """Copy with one shared threshold for stages 1 and 2."""
        policy = replace(self, thresholds=(theta, theta))
        policy.validate()
        return policy

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["thresholds"] = list(self.thresholds)
        data["penalties"] = list(self.penalties)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PolicyConfig":
        """Create a validated PolicyConfig.

        A scalar "theta" key sets both thresholds.
        """
        values = dict(data)
        if "theta" in values:
            theta = float(values.pop("theta"))
            values.setdefault("thresholds", (theta, theta))
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError("policy", f"unknown keys {sorted(unknown)}")
        for key in ("thresholds", "penalties"):
            if key in values:
                values[key] = tuple(float(v) for v in values[key])
        policy = cls(**values)
        policy.validate()
        return policy


@dataclass(frozen=True)
class StageDecision:
    """Outcome of one visited stage."""

    stage: int
    probabilities: tuple[float, ...]
    confidence: float
    decided: bool
    predicted: SubType | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "probabilities": list(self.probabilities),
            "confidence": self.confidence,
            "decided": self.decided,
            "predicted": self.predicted.label if self.predicted is not None else None,
        }


def confidence(probs: Tensor | Sequence[float]) -> Tensor:
    """Gap between the highest and second-highest probability (last dimension)."""
    p = probs if isinstance(probs, Tensor) else torch.as_tensor(probs, dtype=torch.float64)
    top2 = p.topk(2, dim=-1).values
    return top2[..., 0] - top2[..., 1]


def stage_loss(
    C: Tensor | float,
    L_con: Tensor | float,
    k: int,
    cfg: PolicyConfig,
    correct: Tensor | None = None,
) -> Tensor:
    """Threshold-gated loss of stage k, element-wise over a batch.

    Returns L_con where C >= theta^k or k = 3, and -C * delta^k elsewhere. The
    comparison uses a detached C. With gate_penalty_on_correct, wrongly
    predicted subjects always take L_con. Without the progressive policy every
    stage is trained on L_con.
    """
    c = torch.as_tensor(C, dtype=torch.float64) if not isinstance(C, Tensor) else C
    l_con = torch.as_tensor(L_con, dtype=c.dtype) if not isinstance(L_con, Tensor) else L_con
    if k == N_STAGES or not cfg.progressive:
        return l_con
    use_contrastive = c.detach() >= cfg.threshold(k)
    if cfg.gate_penalty_on_correct and correct is not None:
        use_contrastive = use_contrastive | ~correct
    return torch.where(use_contrastive, l_con, -c * cfg.penalty(k))


@dataclass
class BatchOutputs:
    """Everything the objective needs from one forward pass.

    stage_rows[k-1] indexes the batch rows that reach stage k (sorted);
    stage_probs[k-1] and stage_features[k-1] hold one row per such subject.
    stage_features are the per-modality features f^1, f^2, f^3 before fusion.
    """

    labels: Tensor
    stage_rows: list[Tensor]
    stage_probs: list[Tensor]
    stage_features: list[Tensor]
    text_mask: Tensor
    pairs: list[DisentangledPair] | None = None


@dataclass
class LossWeights:
    """Weights of the auxiliary loss terms; the stage losses always have weight 1."""

    alignment: float = 1.0
    orthogonal: float = 1.0
    mi: float = 1.0

    def validate(self) -> None:
        for name, value in asdict(self).items():
            if value < 0 or not math.isfinite(value):
                raise ConfigurationError(f"loss.{name}", f"must be a non-negative number, got {value}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LossWeights":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError("loss", f"unknown keys {sorted(unknown)}")
        weights = cls(**{k: float(v) for k, v in data.items()})
        weights.validate()
        return weights


@dataclass
class LossBreakdown:
    """Total loss and its named terms; total is exactly the sum of the terms."""

    terms: dict[str, Tensor] = field(default_factory=dict)
    total: Tensor = field(default_factory=lambda: torch.zeros(()))

    def as_floats(self) -> dict[str, float]:
        values = {name: float(value.detach()) for name, value in self.terms.items()}
        values["total"] = float(self.total.detach())
        return values

    def first_non_finite(self) -> str | None:
        """Name of the first term that is NaN or infinite."""
        for name, value in self.terms.items():
            if not math.isfinite(float(value.detach())):
                return name
        if not math.isfinite(float(self.total.detach())):
            return "total"
        return None


def total_loss(
    outputs: BatchOutputs,
    policy: PolicyConfig,
    use_alignment: bool = True,
    weights: LossWeights | None = None,
) -> LossBreakdown:
    """Sum of stage losses, alignment and disentanglement penalties.

    Every term has weight 1 unless weights says otherwise; the reported terms
    are the weighted ones.
    Stage losses are summed over the subjects reaching each stage and divided
    by the batch size. The alignment term is present only when some subject
    has MRI; the orthogonal and MI terms only when the text is disentangled.

    Raises:
        InputError: If the batch is empty
    """
    batch_size = outputs.labels.shape[0]
    if batch_size == 0:
        raise InputError("cannot compute the loss of an empty batch")
    weights = weights or LossWeights()

    terms: dict[str, Tensor] = {}
    for k in range(1, N_STAGES + 1):
        rows = outputs.stage_rows[k - 1]
        probs = outputs.stage_probs[k - 1]
        if rows.numel() == 0:
            terms[f"stage{k}"] = probs.new_zeros(())
            continue
        labels = outputs.labels[rows]
        l_con = guideline_contrastive_loss(probs, labels)
        correct = probs.detach().argmax(dim=-1) == labels
        per_subject = stage_loss(confidence(probs), l_con, k, policy, correct)
        terms[f"stage{k}"] = per_subject.sum() / batch_size

    rows2, rows3 = outputs.stage_rows[1], outputs.stage_rows[2]
    if use_alignment and rows2.numel() > 0:
        f1, f2, f3 = outputs.stage_features
        align = alignment_loss(f1[rows2], f2)
        if rows3.numel() > 0:
            align = align + alignment_loss(f2[torch.searchsorted(rows2, rows3)], f3)
        terms["alignment"] = weights.alignment * align

    if outputs.pairs is not None:
        terms["orthogonal"] = weights.orthogonal * orthogonal_loss(outputs.pairs, outputs.text_mask)
        terms["mi"] = weights.mi * mi_penalty_total(outputs.pairs, outputs.text_mask)

    total = torch.stack(list(terms.values())).sum()
    return LossBreakdown(terms=terms, total=total)


def _stage_decision(k: int, p: Tensor, cfg: PolicyConfig) -> StageDecision:
    c = float(confidence(p))
    decided = k == N_STAGES or (cfg.progressive and c >= cfg.threshold(k))
    return StageDecision(
        stage=k,
        probabilities=tuple(float(v) for v in p),
        confidence=c,
        decided=decided,
        predicted=SubType(int(p.argmax())) if decided else None,
    )


def decide_trajectory(stage_probs: Tensor, cfg: PolicyConfig) -> list[StageDecision]:
    """Walk the stages of one subject given its (3, n_classes) probabilities.

    Rows for stages that are never visited may hold NaN.
    """
    decisions: list[StageDecision] = []
    for k in range(1, N_STAGES + 1):
        decisions.append(_stage_decision(k, stage_probs[k - 1], cfg))
        if decisions[-1].decided:
            break
    return decisions


class StageScorer(Protocol):
    """What progressive inference needs from a model."""

    def stage_probabilities(self, record: SubjectRecord, stage: int) -> Tensor: ...


def run_progressive_inference(
    record: SubjectRecord, model: StageScorer, cfg: PolicyConfig
) -> list[StageDecision]:
    """Diagnose one subject, acquiring modalities only while confidence is too low.

    Raises:
        CohortValidationError: If a stage is needed whose modality is missing
    """
    decisions: list[StageDecision] = []
    for k in range(1, N_STAGES + 1):
        if (k == 2 and not record.has_mri) or (k == 3 and not record.has_pet):
            raise CohortValidationError(f"stage {k} was requested but its modality is missing", record.id)
        decisions.append(_stage_decision(k, model.stage_probabilities(record, k), cfg))
        if decisions[-1].decided:
            break
    return decisions


def decision_stage(trajectory: Sequence[StageDecision]) -> int:
    return trajectory[-1].stage


def trajectories_to_json(trajectories: dict[str, list[StageDecision]]) -> str:
    """Serialize per-subject trajectories for audit."""
    return json.dumps(
        {sid: [d.to_dict() for d in trajectory] for sid, trajectory in trajectories.items()},
        indent=2,
        sort_keys=True,
    )
