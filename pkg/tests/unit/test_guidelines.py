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

"""Tests for the guidelines module."""

from pathlib import Path

import pytest

from progdx.core.cohort import SubType
from progdx.core.exceptions import ConfigNotFoundError, ConfigParseError
from progdx.core.guidelines import guideline_corpus


class TestGuidelineCorpus:
    """Tests for the built-in corpus."""

    def test_four_criteria_in_code_order(self) -> None:
        """Should hold one criterion per sub-type ordered by code."""
        corpus = guideline_corpus()
        assert len(corpus) == 4
        assert [c.subtype for c in corpus] == list(SubType)

    def test_typical_ad_text(self) -> None:
        """Typical AD requires episodic memory impairment."""
        assert "Significant episodic memory impairment" in guideline_corpus()[SubType.TYPICAL_AD].text

    def test_normal_control_text(self) -> None:
        """Normal controls have no in-vivo evidence."""
        assert "No evidence of Alzheimer’s disease" in guideline_corpus()[SubType.NORMAL_CONTROL].text


class TestCorpusOverride:
    """Tests for loading a replacement corpus."""

    def test_loads_toml(self, tmp_path: Path) -> None:
        """Should replace every text."""
        path = tmp_path / "corpus.toml"
        path.write_text(
            "\n".join(f'[{s.label}]\ntext = "criterion {s.label}"' for s in SubType)
        )
        corpus = guideline_corpus(path)
        assert corpus[SubType.ATYPICAL_AD].text == "criterion AtypicalAD"

    def test_missing_subtype(self, tmp_path: Path) -> None:
        """Should name the missing sub-types."""
        path = tmp_path / "corpus.toml"
        path.write_text('[TypicalAD]\ntext = "only one"\n')
        with pytest.raises(ConfigParseError, match="AtypicalAD"):
            guideline_corpus(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Should raise ConfigNotFoundError."""
        with pytest.raises(ConfigNotFoundError):
            guideline_corpus(tmp_path / "none.toml")
