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

"""Subject records and the JSON-Lines cohort format.

A cohort file holds one subject per line:
- id: unique string
- label: one of TypicalAD, AtypicalAD, PreclinicalAD, NormalControl
- tabular: object with the named tabular fields (absent keys are missing)
- mri_path / pet_path: raw little-endian float32 file with a JSON shape sidecar
- mri / pet: inline nested arrays, for tiny volumes
"""

import json
import logging
from dataclasses import dataclass, fields
from enum import IntEnum
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from progdx.core.exceptions import (
    CohortNotFoundError,
    CohortParseError,
    CohortValidationError,
)

logger = logging.getLogger(__name__)

Volume = npt.NDArray[np.float32]

COHORT_FILENAME = "cohort.jsonl"
VOLUME_DTYPE = "f32le"

# Clinical dementia rating levels accepted for dementia_level
CDR_LEVELS: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 3.0)


class SubType(IntEnum):
    """The four diagnostic sub-types. Integer codes are used by the metrics."""

    TYPICAL_AD = 0
    ATYPICAL_AD = 1
    PRECLINICAL_AD = 2
    NORMAL_CONTROL = 3

    @property
    def label(self) -> str:
        """The string used for this sub-type in cohort files and reports."""
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "SubType":
        """Parse a cohort-file label.

        Args:
            label: One of TypicalAD, AtypicalAD, PreclinicalAD, NormalControl

        Returns:
            The matching SubType

        Raises:
            ValueError: If the label is unknown
        """
        for subtype, name in _LABELS.items():
            if name == label:
                return subtype
        raise ValueError(f"Unknown sub-type label '{label}' (expected one of {sorted(_LABELS.values())})")


_LABELS: dict[SubType, str] = {
    SubType.TYPICAL_AD: "TypicalAD",
    SubType.ATYPICAL_AD: "AtypicalAD",
    SubType.PRECLINICAL_AD: "PreclinicalAD",
    SubType.NORMAL_CONTROL: "NormalControl",
}

PERSONAL_FIELDS: tuple[str, ...] = ("age", "education", "gender")
HEALTH_FIELDS: tuple[str, ...] = (
    "heart_attack",
    "hypertension",
    "stroke",
    "alcohol_abuse",
    "psychiatric_disorder",
    "blood_test",
)
DEMENTIA_FIELDS: tuple[str, ...] = ("dementia_level",)

_BOOL_FIELDS = frozenset(HEALTH_FIELDS) - {"blood_test"}


@dataclass(frozen=True)
class TabularRecord:
    """Tabular fields of one subject. None marks a missing value."""

    age: int | None = None
    education: int | None = None
    gender: str | None = None
    heart_attack: bool | None = None
    hypertension: bool | None = None
    stroke: bool | None = None
    alcohol_abuse: bool | None = None
    psychiatric_disorder: bool | None = None
    blood_test: float | None = None
    dementia_level: float | None = None

    def present_fields(self) -> list[str]:
        """Names of the fields that have a value, in declaration order."""
        return [f.name for f in fields(self) if getattr(self, f.name) is not None]

    def is_empty(self) -> bool:
        """Check whether every tabular field is missing."""
        return not self.present_fields()

    def to_dict(self) -> dict[str, Any]:
        """Serialize present fields only; missing fields are absent keys."""
        return {name: getattr(self, name) for name in self.present_fields()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TabularRecord":
        """Create a TabularRecord from a cohort-file dictionary.

        Args:
            data: The 'tabular' object of a cohort line

        Returns:
            TabularRecord instance

        Raises:
            ValueError: If a key is unknown or a value has the wrong type
        """
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown tabular fields: {sorted(unknown)}")

        values: dict[str, Any] = {}
        for name, value in data.items():
            if value is None:
                continue
            if name in _BOOL_FIELDS:
                if not isinstance(value, bool):
                    raise ValueError(f"Field '{name}' must be true or false, got {value!r}")
                values[name] = value
            elif name in ("age", "education"):
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise ValueError(f"Field '{name}' must be a non-negative integer, got {value!r}")
                values[name] = value
            elif name == "gender":
                values[name] = str(value)
            elif name == "blood_test":
                if isinstance(value, bool) or not isinstance(value, int | float):
                    raise ValueError(f"Field 'blood_test' must be a number, got {value!r}")
                values[name] = float(value)
            elif name == "dementia_level":
                if isinstance(value, bool) or float(value) not in CDR_LEVELS:
                    raise ValueError(f"Field 'dementia_level' must be one of {CDR_LEVELS}, got {value!r}")
                values[name] = float(value)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """One subject: tabular fields, optional MRI/PET volumes and the sub-type label."""

    id: str
    label: SubType
    tabular: TabularRecord
    mri: Volume | None = None
    pet: Volume | None = None

    @property
    def has_mri(self) -> bool:
        return self.mri is not None

    @property
    def has_pet(self) -> bool:
        return self.pet is not None

    @property
    def tier(self) -> int:
        """Availability tier: 1 tabular only, 2 adds MRI, 3 adds PET."""
        if self.has_pet:
            return 3
        if self.has_mri:
            return 2
        return 1

    @property
    def has_full_modalities(self) -> bool:
        return self.has_pet and self.has_mri and not self.tabular.is_empty()


def validate_record(record: SubjectRecord, volume_shape: tuple[int, ...] | None = None) -> None:
    """Check the nesting and shape invariants of a single record.

    Args:
        record: The record to check
        volume_shape: Required volume shape, or None to skip the shape check

    Raises:
        CohortValidationError: If PET is present without MRI, MRI without tabular
            data, or a volume has the wrong shape
    """
    if record.has_pet and not record.has_mri:
        raise CohortValidationError("PET volume present without an MRI volume", record.id)
    if record.has_mri and record.tabular.is_empty():
        raise CohortValidationError("MRI volume present without any tabular field", record.id)
    if record.tabular.is_empty():
        raise CohortValidationError("record has no tabular field", record.id)

    for name, volume in (("mri", record.mri), ("pet", record.pet)):
        if volume is None:
            continue
        if volume.ndim != 3:
            raise CohortValidationError(f"{name} volume must be 3D, got {volume.ndim}D", record.id)
        if volume_shape is not None and tuple(volume.shape) != tuple(volume_shape):
            raise CohortValidationError(
                f"{name} volume shape {tuple(volume.shape)} does not match {tuple(volume_shape)}",
                record.id,
            )


def cohort_volume_shape(records: list[SubjectRecord]) -> tuple[int, int, int] | None:
    """Shape shared by the cohort's volumes, or None when no record has a volume."""
    for record in records:
        volume = record.mri if record.mri is not None else record.pet
        if volume is not None:
            d, h, w = volume.shape
            return (int(d), int(h), int(w))
    return None


def validate_cohort(
    records: list[SubjectRecord], volume_shape: tuple[int, ...] | None = None
) -> None:
    """Check every record and the uniqueness of subject ids.

    When no shape is given, all volumes must share the shape of the first one.

    Raises:
        CohortValidationError: On the first violated invariant
    """
    seen: set[str] = set()
    shape = volume_shape if volume_shape is not None else cohort_volume_shape(records)
    for record in records:
        if record.id in seen:
            raise CohortValidationError("duplicate subject id", record.id)
        seen.add(record.id)
        validate_record(record, shape)


# ============================================================================
# JSON-Lines serialization
# ============================================================================


def _write_volume(volume: Volume, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(volume, dtype="<f4").tofile(path)
    sidecar = {"shape": [int(s) for s in volume.shape], "dtype": VOLUME_DTYPE}
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def _read_volume(path: Path) -> Volume:
    sidecar_path = path.with_suffix(".json")
    if not path.exists() or not sidecar_path.exists():
        raise ValueError(f"Volume file or shape sidecar missing: {path}")
    header = json.loads(sidecar_path.read_text())
    if header.get("dtype") != VOLUME_DTYPE:
        raise ValueError(f"Unsupported volume dtype {header.get('dtype')!r} in {sidecar_path}")
    shape = tuple(int(s) for s in header["shape"])
    data = np.fromfile(path, dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"Volume {path} holds {data.size} values, sidecar shape {shape} needs {int(np.prod(shape))}")
    return data.reshape(shape).astype(np.float32)


def record_to_dict(
    record: SubjectRecord, volume_dir: Path | None = None, inline_voxel_limit: int = 0
) -> dict[str, Any]:
    """Serialize a record to a cohort-line dictionary.

    Volumes with at most inline_voxel_limit voxels (or any volume when
    volume_dir is None) are inlined as nested lists; larger ones are written
    under volume_dir and referenced by a path relative to volume_dir's parent.
    """
    line: dict[str, Any] = {
        "id": record.id,
        "label": record.label.label,
        "tabular": record.tabular.to_dict(),
    }
    for name, volume in (("mri", record.mri), ("pet", record.pet)):
        if volume is None:
            continue
        if volume_dir is None or volume.size <= inline_voxel_limit:
            line[name] = volume.tolist()
        else:
            raw_path = volume_dir / f"{record.id}_{name}.f32"
            _write_volume(volume, raw_path)
            line[f"{name}_path"] = str(raw_path.relative_to(volume_dir.parent))
    return line


def record_from_dict(data: dict[str, Any], base_dir: Path) -> SubjectRecord:
    """Parse a cohort-line dictionary.

    Args:
        data: Decoded JSON object of one line
        base_dir: Directory that relative volume paths are resolved against

    Raises:
        KeyError, TypeError, ValueError: If the line does not follow the format
    """
    if not isinstance(data, dict):
        raise TypeError("line must be a JSON object")
    subject_id = data["id"]
    if not isinstance(subject_id, str) or not subject_id:
        raise ValueError("'id' must be a non-empty string")
    tabular_data = data.get("tabular", {})
    if not isinstance(tabular_data, dict):
        raise TypeError("'tabular' must be an object")

    volumes: dict[str, Volume | None] = {}
    for name in ("mri", "pet"):
        if f"{name}_path" in data:
            volumes[name] = _read_volume(base_dir / data[f"{name}_path"])
        elif name in data and data[name] is not None:
            volumes[name] = np.asarray(data[name], dtype=np.float32)
        else:
            volumes[name] = None

    return SubjectRecord(
        id=subject_id,
        label=SubType.from_label(data["label"]),
        tabular=TabularRecord.from_dict(tabular_data),
        mri=volumes["mri"],
        pet=volumes["pet"],
    )


def save_cohort(
    records: list[SubjectRecord], directory: Path, inline_voxel_limit: int = 0
) -> Path:
    """Write a cohort as cohort.jsonl plus raw volume files.

    Args:
        records: Records to write
        directory: Output directory (created if needed)
        inline_voxel_limit: Volumes with at most this many voxels are inlined

    Returns:
        Path to the written cohort.jsonl
    """
    directory.mkdir(parents=True, exist_ok=True)
    volume_dir = directory / "volumes"
    path = directory / COHORT_FILENAME
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            line = record_to_dict(record, volume_dir, inline_voxel_limit)
            handle.write(json.dumps(line, sort_keys=True) + "\n")
    logger.info("Wrote %d records to %s", len(records), path)
    return path


def load_cohort(path: Path, volume_shape: tuple[int, ...] | None = None) -> list[SubjectRecord]:
    """Load and validate a JSON-Lines cohort.

    Args:
        path: cohort.jsonl file, or a directory containing one
        volume_shape: Required volume shape, or None to require a shared shape

    Returns:
        Records in file order

    Raises:
        CohortNotFoundError: If the file does not exist
        CohortParseError: If a line is malformed (names the line number)
        CohortValidationError: If the records violate the cohort invariants
    """
    if path.is_dir():
        path = path / COHORT_FILENAME
    if not path.exists():
        raise CohortNotFoundError(str(path))

    records: list[SubjectRecord] = []
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line), path.parent))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise CohortParseError(str(path), line_number, str(e)) from e

    validate_cohort(records, volume_shape)
    logger.info("Loaded %d records from %s", len(records), path)
    return records
