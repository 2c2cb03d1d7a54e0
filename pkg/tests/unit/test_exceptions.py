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

"""Tests for the exceptions module."""

from progdx.core.exceptions import (
    CheckpointIntegrityError,
    CheckpointVersionError,
    CohortParseError,
    CohortValidationError,
    ConfigNotFoundError,
    ConfigParseError,
    ConfigurationError,
    CriticalTrainingError,
    DegenerateBatchError,
    NonFiniteLossError,
    ProgdxError,
    ShapeError,
    ValidationError,
)


class TestProgdxError:
    """Tests for the base ProgdxError."""

    def test_message_only(self) -> None:
        """Should format message without suggestion."""
        error = ProgdxError("Something went wrong")
        assert str(error) == "Something went wrong"
        assert error.message == "Something went wrong"
        assert error.suggestion == ""

    def test_message_and_suggestion(self) -> None:
        """Should format message with suggestion."""
        error = ProgdxError("Error occurred", "Try this fix")
        assert str(error) == "Error occurred\n\nTry this fix"


class TestConfigErrors:
    """Tests for configuration errors."""

    def test_not_found_includes_path(self) -> None:
        """Should include the missing path."""
        error = ConfigNotFoundError("/path/to/run.toml")
        assert "/path/to/run.toml" in str(error)
        assert error.path == "/path/to/run.toml"

    def test_parse_error_includes_details(self) -> None:
        """Should include parse error details."""
        error = ConfigParseError("run.toml", "Invalid TOML syntax")
        assert "Invalid TOML syntax" in str(error)
        assert error.details == "Invalid TOML syntax"

    def test_configuration_error_names_field(self) -> None:
        """Should name the offending field."""
        error = ConfigurationError("tau", "must be positive")
        assert "'tau'" in error.message
        assert isinstance(error, ValidationError)


class TestCohortErrors:
    """Tests for cohort errors."""

    def test_parse_error_names_line(self) -> None:
        """Should report the 1-based line number."""
        error = CohortParseError("cohort.jsonl", 7, "bad json")
        assert "line 7" in str(error)
        assert error.line_number == 7

    def test_validation_error_names_subject(self) -> None:
        """Should name the subject when given."""
        error = CohortValidationError("PET without MRI", "S0001")
        assert "S0001" in error.message
        assert error.subject_id == "S0001"


class TestShapeErrors:
    """Tests for ShapeError and DegenerateBatchError."""

    def test_shape_error_carries_dimensions(self) -> None:
        """Should carry expected and actual shapes."""
        error = ShapeError("features", 128, 64)
        assert error.expected == 128
        assert error.actual == 64
        assert "expected 128, got 64" in str(error)

    def test_degenerate_batch(self) -> None:
        """Should report the row count."""
        error = DegenerateBatchError(1)
        assert error.rows == 1
        assert "at least 2" in str(error)


class TestCheckpointErrors:
    """Tests for checkpoint errors."""

    def test_integrity_error(self) -> None:
        """Should include the path and details."""
        error = CheckpointIntegrityError("model.ckpt", "digest mismatch")
        assert "model.ckpt" in str(error)
        assert "digest mismatch" in str(error)

    def test_version_error(self) -> None:
        """Should report found and expected versions."""
        error = CheckpointVersionError("model.ckpt", 9, 1)
        assert error.found == 9
        assert error.expected == 1


class TestCriticalTrainingError:
    """Tests for CriticalTrainingError."""

    def test_default_suggestion(self) -> None:
        """Should provide default suggestion."""
        error = CriticalTrainingError("Run failed")
        assert "aborted" in error.suggestion

    def test_non_finite_loss(self) -> None:
        """Should name the term, epoch and step."""
        error = NonFiniteLossError("mi", 3, 12)
        assert error.term == "mi"
        assert "epoch 3, step 12" in str(error)
        assert isinstance(error, CriticalTrainingError)
