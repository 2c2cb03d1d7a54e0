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

"""Integration tests for the cohort to checkpoint to report round trip."""

from pathlib import Path

import numpy as np

from progdx.core.checkpoint import load_checkpoint
from progdx.core.cohort import SubjectRecord, load_cohort, save_cohort
from progdx.core.config import TrainConfig
from progdx.core.evaluation import evaluate
from progdx.core.folds import split_folds
from progdx.core.trainer import train


class TestPersistence:
    """Saved cohorts and checkpoints should reproduce in-memory results."""

    def test_cohort_round_trip(self, tiny_cohort: list[SubjectRecord], tmp_path: Path) -> None:
        """Volumes and tabular fields should survive a save and load."""
        loaded = load_cohort(save_cohort(tiny_cohort, tmp_path / "data"))
        assert [r.id for r in loaded] == [r.id for r in tiny_cohort]
        for before, after in zip(tiny_cohort, loaded, strict=True):
            assert after.label == before.label
            assert after.tabular == before.tabular
            for a, b in ((before.mri, after.mri), (before.pet, after.pet)):
                assert (a is None) == (b is None)
                if a is not None and b is not None:
                    np.testing.assert_array_equal(a, b)

    def test_train_save_load_evaluate(
        self, tiny_cohort: list[SubjectRecord], tiny_train_config: TrainConfig, tmp_path: Path
    ) -> None:
        """A reloaded cohort and checkpoint should give the same report."""
        cohort_path = save_cohort(tiny_cohort, tmp_path / "data")
        records = load_cohort(cohort_path)
        result = train(records, tiny_train_config, out_path=tmp_path / "model.ckpt")
        assert result.checkpoint is not None

        test_records = split_folds(records, tiny_train_config.seed, tiny_train_config.rotation).test_records(
            records
        )
        in_memory = evaluate(result.checkpoint, test_records)
        reloaded = evaluate(load_checkpoint(tmp_path / "model.ckpt"), test_records)
        assert in_memory.to_dict() == reloaded.to_dict()
        assert in_memory.n_test == len(test_records)
