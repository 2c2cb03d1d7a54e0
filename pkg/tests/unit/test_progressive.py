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

"""Tests for the progressive module."""

import json
import math

import pytest
import torch

from progdx.core.cohort import SubjectRecord, SubType
from progdx.core.disentangle import DisentangledPair
from progdx.core.exceptions import CohortValidationError, ConfigurationError, InputError
from progdx.core.progressive import (
    BatchOutputs,
    LossWeights,
    PolicyConfig,
    confidence,
    decide_trajectory,
    decision_stage,
    run_progressive_inference,
    stage_loss,
    total_loss,
    trajectories_to_json,
)

UNSURE = (0.4, 0.3, 0.2, 0.1)
SURE = (0.9, 0.05, 0.03, 0.02)


class FakeScorer:
    """Returns canned probabilities per stage and records the stages asked for."""

    def __init__(self, per_stage: dict[int, tuple[float, ...]]) -> None:
        self.per_stage = per_stage
        self.calls: list[int] = []

    def stage_probabilities(self, record: SubjectRecord, stage: int) -> torch.Tensor:
        self.calls.append(stage)
        return torch.tensor(self.per_stage[stage], dtype=torch.float64)


class TestConfidence:
    """Tests for confidence."""

    def test_top_two_gap(self) -> None:
        """Should return the gap between the two largest probabilities."""
        assert abs(float(confidence([0.7, 0.2, 0.05, 0.05])) - 0.5) < 1e-12

    def test_uniform_is_zero(self) -> None:
        """A tie should give 0."""
        assert float(confidence([0.25, 0.25, 0.25, 0.25])) == 0.0

    def test_batched(self) -> None:
        """Should work row-wise."""
        c = confidence(torch.tensor([[1.0, 0.0, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0]]))
        torch.testing.assert_close(c, torch.tensor([1.0, 0.0]))


class TestStageLoss:
    """Tests for stage_loss."""

    def test_penalty_below_threshold(self) -> None:
        """C = 0.1 under theta = 0.3 with delta = 1 should give -0.1."""
        assert abs(float(stage_loss(0.1, 2.0, 1, PolicyConfig())) + 0.1) < 1e-12

    def test_penalty_scales_with_delta(self) -> None:
        """Stage 2 should use its own penalty."""
        assert abs(float(stage_loss(0.2, 2.0, 2, PolicyConfig())) + 0.3) < 1e-12

    def test_contrastive_at_threshold(self) -> None:
        """C equal to theta should use the contrastive loss."""
        assert float(stage_loss(0.3, 2.0, 1, PolicyConfig())) == 2.0

    def test_stage_three_always_contrastive(self) -> None:
        """Stage 3 should ignore the confidence."""
        assert float(stage_loss(0.0, 1.5, 3, PolicyConfig())) == 1.5

    def test_without_progressive_policy(self) -> None:
        """Every stage should use the contrastive loss."""
        cfg = PolicyConfig(progressive=False)
        assert float(stage_loss(0.0, 1.5, 1, cfg)) == 1.5

    def test_gate_on_correctness(self) -> None:
        """Wrong predictions should take the contrastive loss when gated."""
        cfg = PolicyConfig(gate_penalty_on_correct=True)
        c = torch.tensor([0.1, 0.1], dtype=torch.float64)
        l_con = torch.tensor([2.0, 2.0], dtype=torch.float64)
        out = stage_loss(c, l_con, 1, cfg, torch.tensor([True, False]))
        torch.testing.assert_close(out, torch.tensor([-0.1, 2.0], dtype=torch.float64))

    def test_penalty_gradient_pushes_confidence_up(self) -> None:
        """The penalty branch should have gradient -delta w.r.t. C."""
        c = torch.tensor(0.1, dtype=torch.float64, requires_grad=True)
        stage_loss(c, 2.0, 2, PolicyConfig()).backward()
        assert c.grad is not None
        assert float(c.grad) == -1.5


class TestPolicyConfig:
    """Tests for PolicyConfig."""

    def test_defaults(self) -> None:
        """Should default to theta 0.3 and penalties (1, 1.5)."""
        cfg = PolicyConfig()
        assert cfg.thresholds == (0.3, 0.3)
        assert cfg.penalties == (1.0, 1.5)
        assert not cfg.gate_penalty_on_correct

    def test_from_dict_theta(self) -> None:
        """A scalar theta should set both thresholds."""
        assert PolicyConfig.from_dict({"theta": 0.5}).thresholds == (0.5, 0.5)

    def test_from_dict_lists(self) -> None:
        """Lists should become tuples."""
        cfg = PolicyConfig.from_dict({"thresholds": [0.1, 0.2], "penalties": [2, 3]})
        assert cfg.thresholds == (0.1, 0.2)
        assert cfg.penalties == (2.0, 3.0)

    def test_unknown_key(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            PolicyConfig.from_dict({"temperature": 1})

    @pytest.mark.parametrize("theta", [-0.1, 1.5])
    def test_theta_out_of_range(self, theta: float) -> None:
        """Should reject thresholds outside [0, 1]."""
        with pytest.raises(ConfigurationError):
            PolicyConfig().with_theta(theta)

    def test_non_positive_penalty(self) -> None:
        """Should reject penalties <= 0."""
        with pytest.raises(ConfigurationError):
            PolicyConfig.from_dict({"penalties": [1.0, 0.0]})


def _outputs() -> BatchOutputs:
    """Two subjects; the second reaches stage 2; nobody reaches stage 3."""
    f64 = torch.float64
    return BatchOutputs(
        labels=torch.tensor([0, 1]),
        stage_rows=[torch.tensor([0, 1]), torch.tensor([1]), torch.tensor([], dtype=torch.long)],
        stage_probs=[
            torch.tensor([[0.7, 0.1, 0.1, 0.1], list(UNSURE)], dtype=f64),
            torch.tensor([[0.1, 0.6, 0.2, 0.1]], dtype=f64),
            torch.zeros(0, 4, dtype=f64),
        ],
        stage_features=[
            torch.tensor([[0.0, 0.0], [1.0, 0.0]], dtype=f64),
            torch.tensor([[0.0, 0.0]], dtype=f64),
            torch.zeros(0, 2, dtype=f64),
        ],
        text_mask=torch.ones(2, 3, dtype=torch.bool),
    )


class TestTotalLoss:
    """Tests for total_loss."""

    def test_decomposition(self) -> None:
        """Terms should match hand-computed values and add up to the total."""
        breakdown = total_loss(_outputs(), PolicyConfig())
        values = breakdown.as_floats()
        assert abs(values["stage1"] - (-math.log(0.7) - 0.1) / 2) < 1e-9
        assert abs(values["stage2"] - (-math.log(0.6)) / 2) < 1e-9
        assert values["stage3"] == 0.0
        assert abs(values["alignment"] - 0.5) < 1e-12
        assert "orthogonal" not in values
        assert abs(values["total"] - sum(v for k, v in values.items() if k != "total")) < 1e-12

    def test_without_alignment(self) -> None:
        """Disabling alignment should drop the term."""
        breakdown = total_loss(_outputs(), PolicyConfig(), use_alignment=False)
        assert set(breakdown.terms) == {"stage1", "stage2", "stage3"}

    def test_tabular_only_batch(self) -> None:
        """A batch without MRI should have no alignment term."""
        outputs = _outputs()
        outputs.stage_rows[1] = torch.tensor([], dtype=torch.long)
        outputs.stage_probs[1] = torch.zeros(0, 4, dtype=torch.float64)
        outputs.stage_features[1] = torch.zeros(0, 2, dtype=torch.float64)
        breakdown = total_loss(outputs, PolicyConfig())
        assert "alignment" not in breakdown.terms
        assert breakdown.first_non_finite() is None

    def test_empty_batch(self) -> None:
        """Should raise InputError."""
        outputs = _outputs()
        outputs.labels = torch.tensor([], dtype=torch.long)
        with pytest.raises(InputError):
            total_loss(outputs, PolicyConfig())

    def test_weighted_terms(self) -> None:
        """Auxiliary terms should be scaled by their weights; stage terms should not."""
        plain = total_loss(_outputs(), PolicyConfig()).as_floats()
        weighted = total_loss(_outputs(), PolicyConfig(), weights=LossWeights(alignment=0.25)).as_floats()
        assert abs(weighted["alignment"] - 0.25 * plain["alignment"]) < 1e-12
        assert weighted["stage1"] == plain["stage1"]
        assert abs(weighted["total"] - sum(v for k, v in weighted.items() if k != "total")) < 1e-12

    def test_disentanglement_weights(self) -> None:
        """A zero MI weight should zero the MI term and keep the orthogonal one."""
        gen = torch.Generator().manual_seed(0)
        outputs = _outputs()
        outputs.pairs = [
            DisentangledPair(
                torch.randn(2, 2, generator=gen, dtype=torch.float64),
                torch.randn(2, 2, generator=gen, dtype=torch.float64),
                s,
            )
            for s in "phd"
        ]
        plain = total_loss(outputs, PolicyConfig()).terms
        terms = total_loss(outputs, PolicyConfig(), weights=LossWeights(mi=0.0, orthogonal=2.0)).terms
        assert float(terms["mi"]) == 0.0
        torch.testing.assert_close(terms["orthogonal"], 2.0 * plain["orthogonal"])


class TestLossWeights:
    """Tests for LossWeights."""

    def test_defaults_are_one(self) -> None:
        """Every auxiliary term should default to weight 1."""
        assert LossWeights().to_dict() == {"alignment": 1.0, "orthogonal": 1.0, "mi": 1.0}

    def test_from_dict(self) -> None:
        """Missing keys should keep their defaults."""
        assert LossWeights.from_dict({"mi": 0.5}) == LossWeights(mi=0.5)

    def test_negative_weight(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            LossWeights.from_dict({"mi": -1.0})

    def test_unknown_key(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            LossWeights.from_dict({"stage1": 1.0})


class TestDecideTrajectory:
    """Tests for decide_trajectory."""

    def test_confident_stops_at_stage_one(self) -> None:
        """A confident stage 1 should end the trajectory."""
        probs = torch.tensor([SURE, UNSURE, UNSURE], dtype=torch.float64)
        trajectory = decide_trajectory(probs, PolicyConfig())
        assert len(trajectory) == 1
        assert trajectory[0].predicted is SubType.TYPICAL_AD

    def test_unvisited_stages_may_be_nan(self) -> None:
        """NaN rows after the deciding stage should be ignored."""
        probs = torch.tensor([SURE, [math.nan] * 4, [math.nan] * 4], dtype=torch.float64)
        assert decision_stage(decide_trajectory(probs, PolicyConfig())) == 1

    def test_theta_zero(self) -> None:
        """Theta 0 should always decide at stage 1."""
        probs = torch.tensor([(0.25,) * 4, UNSURE, UNSURE], dtype=torch.float64)
        assert len(decide_trajectory(probs, PolicyConfig().with_theta(0.0))) == 1

    def test_theta_one(self) -> None:
        """Theta 1 should reach stage 3 unless a stage is certain."""
        probs = torch.tensor([SURE, SURE, UNSURE], dtype=torch.float64)
        trajectory = decide_trajectory(probs, PolicyConfig().with_theta(1.0))
        assert len(trajectory) == 3
        assert [d.decided for d in trajectory] == [False, False, True]
        assert trajectory[-1].predicted is SubType.TYPICAL_AD

    def test_decision_stage_monotone_in_theta(self) -> None:
        """Raising theta should never decide earlier."""
        gen = torch.Generator().manual_seed(0)
        for _ in range(20):
            probs = torch.softmax(torch.randn(3, 4, generator=gen, dtype=torch.float64), dim=-1)
            stages = [
                decision_stage(decide_trajectory(probs, PolicyConfig().with_theta(theta)))
                for theta in (0.0, 0.1, 0.3, 0.5, 0.7, 1.0)
            ]
            assert stages == sorted(stages)

    def test_without_progressive_policy(self) -> None:
        """Every subject should reach stage 3."""
        probs = torch.tensor([SURE, SURE, SURE], dtype=torch.float64)
        assert decision_stage(decide_trajectory(probs, PolicyConfig(progressive=False))) == 3


class TestRunProgressiveInference:
    """Tests for run_progressive_inference."""

    def test_acquires_only_needed_stages(self, full_record: SubjectRecord) -> None:
        """Should stop asking for stages once confident."""
        scorer = FakeScorer({1: UNSURE, 2: SURE, 3: SURE})
        trajectory = run_progressive_inference(full_record, scorer, PolicyConfig())
        assert scorer.calls == [1, 2]
        assert decision_stage(trajectory) == 2

    def test_reaches_stage_three(self, full_record: SubjectRecord) -> None:
        """Stage 3 should decide regardless of confidence."""
        scorer = FakeScorer({1: UNSURE, 2: UNSURE, 3: UNSURE})
        trajectory = run_progressive_inference(full_record, scorer, PolicyConfig())
        assert [d.stage for d in trajectory] == [1, 2, 3]
        assert trajectory[-1].decided

    def test_missing_modality(self, tabular_only_record: SubjectRecord) -> None:
        """Should raise CohortValidationError when MRI is needed but absent."""
        scorer = FakeScorer({1: UNSURE})
        with pytest.raises(CohortValidationError):
            run_progressive_inference(tabular_only_record, scorer, PolicyConfig())

    def test_confident_subject_without_imaging(self, tabular_only_record: SubjectRecord) -> None:
        """A subject decided at stage 1 needs no imaging."""
        trajectory = run_progressive_inference(tabular_only_record, FakeScorer({1: SURE}), PolicyConfig())
        assert decision_stage(trajectory) == 1


class TestTrajectoriesToJson:
    """Tests for trajectories_to_json."""

    def test_serializes_decisions(self) -> None:
        """Should write one list of stage decisions per subject."""
        probs = torch.tensor([UNSURE, SURE, SURE], dtype=torch.float64)
        data = json.loads(trajectories_to_json({"S00001": decide_trajectory(probs, PolicyConfig())}))
        assert [d["stage"] for d in data["S00001"]] == [1, 2]
        assert data["S00001"][0]["predicted"] is None
        assert data["S00001"][1]["predicted"] == "TypicalAD"
        assert len(data["S00001"][1]["probabilities"]) == 4
