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

"""Tests for the folds module."""

from collections import Counter

import pytest

from progdx.core.cohort import SubjectRecord
from progdx.core.exceptions import CohortValidationError, ConfigurationError
from progdx.core.folds import N_FOLDS, role_map, split_folds


class TestRoleMap:
    """Tests for role_map."""

    def test_three_one_one(self) -> None:
        """Should assign three train folds, one validation, one test."""
        roles = list(role_map().values())
        assert roles.count("train") == 3
        assert roles.count("validation") == 1
        assert roles.count("test") == 1

    def test_rotations_cover_every_fold(self) -> None:
        """Over all rotations each fold should be the test fold once."""
        test_folds = {
            fold for rotation in range(N_FOLDS) for fold, role in role_map(rotation).items() if role == "test"
        }
        assert test_folds == set(range(N_FOLDS))

    def test_bad_rotation(self) -> None:
        """Should raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            role_map(5)


class TestSplitFolds:
    """Tests for split_folds."""

    def test_partition(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Every record should be in exactly one fold and one role."""
        split = split_folds(tiny_cohort, seed=1)
        assert set(split.folds) == {r.id for r in tiny_cohort}
        roles = [split.ids_for(role) for role in ("train", "validation", "test")]
        assert set().union(*roles) == set(split.folds)
        assert sum(len(r) for r in roles) == len(tiny_cohort)

    def test_five_records(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Five records should land in five distinct folds."""
        split = split_folds(tiny_cohort[:5], seed=3)
        assert sorted(split.folds.values()) == list(range(N_FOLDS))

    def test_deterministic(self, tiny_cohort: list[SubjectRecord]) -> None:
        """The same seed should give the same split."""
        assert split_folds(tiny_cohort, 4) == split_folds(tiny_cohort, 4)

    def test_test_records_have_full_modalities(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Evaluation subjects should all have tabular data, MRI and PET."""
        split = split_folds(tiny_cohort, 0)
        test = split.test_records(tiny_cohort)
        assert test
        assert all(r.has_full_modalities for r in test)
        assert {r.id for r in test} <= split.ids_for("test")

    def test_duplicate_ids(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Should refuse overlapping ids."""
        with pytest.raises(CohortValidationError):
            split_folds([tiny_cohort[0], tiny_cohort[0]], 0)

    def test_fold_sizes_near_equal(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Fold sizes should differ by at most one."""
        split = split_folds(tiny_cohort, seed=2)
        sizes = Counter(split.folds.values())
        assert max(sizes.values()) - min(sizes.values()) <= 1

    def test_stratified_by_label(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Each sub-type should be spread evenly over the folds, up to one subject per tier."""
        split = split_folds(tiny_cohort, seed=2)
        for label in {r.label for r in tiny_cohort}:
            counts = Counter(split.folds[r.id] for r in tiny_cohort if r.label == label)
            per_fold = [counts.get(fold, 0) for fold in range(N_FOLDS)]
            assert max(per_fold) - min(per_fold) <= 3

    def test_every_fold_has_full_modality_subjects(self, tiny_cohort: list[SubjectRecord]) -> None:
        """Full-modality subjects should reach every fold."""
        split = split_folds(tiny_cohort, seed=5)
        folds = {split.folds[r.id] for r in tiny_cohort if r.has_full_modalities}
        assert folds == set(range(N_FOLDS))
