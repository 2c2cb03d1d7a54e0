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

"""Sub-type criteria of the IWG-2 diagnosis guideline.

The built-in corpus holds the four criterion texts fed to the text encoder.
A replacement corpus can be loaded from a TOML file with one table per
sub-type label:

    [TypicalAD]
    text = "..."
"""

from dataclasses import dataclass
from pathlib import Path

import toml

from progdx.core.cohort import SubType
from progdx.core.exceptions import ConfigNotFoundError, ConfigParseError


@dataclass(frozen=True)
class GuidelineCriterion:
    """Criterion text for one sub-type."""

    subtype: SubType
    text: str


DEFAULT_CRITERIA: dict[SubType, str] = {
    SubType.TYPICAL_AD: (
        "Significant episodic memory impairment and In-vivo evidence of Alzheimer’s disease"
    ),
    SubType.ATYPICAL_AD: (
        "Posterior or logopenic or frontal of Alzheimer’s disease and "
        "In-vivo evidence of Alzheimer’s disease"
    ),
    SubType.PRECLINICAL_AD: (
        "Absence of specific clinical phenotype and In-vivo evidence of Alzheimer’s disease"
    ),
    SubType.NORMAL_CONTROL: (
        "Absence of specific clinical phenotype and No evidence of Alzheimer’s disease"
    ),
}


def _load_corpus_file(path: Path) -> dict[SubType, str]:
    if not path.exists():
        raise ConfigNotFoundError(str(path))

    try:
        data = toml.load(path)
    except toml.TomlDecodeError as e:
        raise ConfigParseError(str(path), str(e)) from e

    texts: dict[SubType, str] = {}
    for label, table in data.items():
        try:
            subtype = SubType.from_label(label)
        except ValueError as e:
            raise ConfigParseError(str(path), str(e)) from e
        if not isinstance(table, dict) or not str(table.get("text", "")).strip():
            raise ConfigParseError(str(path), f"[{label}] needs a non-empty 'text' field")
        texts[subtype] = str(table["text"])

    missing = [s.label for s in SubType if s not in texts]
    if missing:
        raise ConfigParseError(str(path), f"Missing criteria for: {', '.join(missing)}")
    return texts


def guideline_corpus(path: Path | None = None) -> list[GuidelineCriterion]:
    """Return the four sub-type criteria, ordered by sub-type code.

    Args:
        path: Optional TOML file replacing the built-in texts

    Returns:
        One GuidelineCriterion per sub-type

    Raises:
        ConfigNotFoundError: If path is given and does not exist
        ConfigParseError: If the file is invalid or lacks a sub-type
    """
    texts = DEFAULT_CRITERIA if path is None else _load_corpus_file(path)
    return [GuidelineCriterion(subtype=s, text=texts[s]) for s in SubType]
