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

"""Five-fold subject splitting: three folds train, one validates, one tests."""

from dataclasses import dataclass
from typing import Literal

import numpy as np

from progdx.core.cohort import SubjectRecord
from progdx.core.exceptions import CohortValidationError, ConfigurationError

Role = Literal["train", "validation", "test"]

N_FOLDS = 5


@dataclass(frozen=True)
class DatasetSplit:
    """Fold assignment per subject id and the role of each fold."""

    folds: dict[str, int]
    roles: dict[int, Role]

    def role_of(self, subject_id: str) -> Role:
        """Role of the fold the subject belongs to."""
        return self.roles[self.folds[subject_id]]

    def ids_for(self, role: Role) -> set[str]:
        """Subject ids assigned to a role."""
        return {sid for sid, fold in self.folds.items() if self.roles[fold] == role}

    def select(self, records: list[SubjectRecord], role: Role) -> list[SubjectRecord]:
        """Records of a role, in input order."""
        return [r for r in records if self.role_of(r.id) == role]

    def test_records(self, records: list[SubjectRecord]) -> list[SubjectRecord]:
        """Test-role records with all modalities; the only ones evaluation uses."""
        return [r for r in self.select(records, "test") if r.has_full_modalities]

    def to_dict(self) -> dict[str, object]:
        return {"folds": dict(self.folds), "roles": {str(k): v for k, v in self.roles.items()}}


def role_map(rotation: int = 0) -> dict[int, Role]:
    """Roles for the five folds: three train, then validation, then test.

    rotation shifts the assignment so that every fold takes each role once
    over rotations 0..4.
    """
    if not 0 <= rotation < N_FOLDS:
        raise ConfigurationError("rotation", f"must lie in [0, {N_FOLDS - 1}], got {rotation}")
    ordered: list[Role] = ["train", "train", "train", "validation", "test"]
    return {(i + rotation) % N_FOLDS: role for i, role in enumerate(ordered)}


def split_folds(records: list[SubjectRecord], seed: int, rotation: int = 0) -> DatasetSplit:
    """Randomly divide subjects into five near-equal folds, stratified by sub-type and tier.

    Subjects are grouped by (label, availability tier) and each shuffled group
    is dealt round-robin across the folds. The deal position carries over from
    one group to the next, so fold sizes differ by at most one and every fold
    receives its share of each sub-type and of the full-modality subjects.

    Args:
        records: Cohort records
        seed: Seed of the shuffling generator
        rotation: Which fold rotation supplies the role map

    Returns:
        DatasetSplit whose folds partition the subject ids

    Raises:
        CohortValidationError: If a subject id occurs twice
    """
    ids = [r.id for r in records]
    seen: set[str] = set()
    for sid in ids:
        if sid in seen:
            raise CohortValidationError("subject id appears more than once; folds would overlap", sid)
        seen.add(sid)

    rng = np.random.default_rng(seed)
    strata: dict[tuple[int, int], list[str]] = {}
    for record in records:
        strata.setdefault((int(record.label), record.tier), []).append(record.id)

    folds: dict[str, int] = {}
    position = 0
    for key in sorted(strata):
        members = strata[key]
        for idx in rng.permutation(len(members)):
            folds[members[int(idx)]] = position % N_FOLDS
            position += 1
    return DatasetSplit(folds=folds, roles=role_map(rotation))
