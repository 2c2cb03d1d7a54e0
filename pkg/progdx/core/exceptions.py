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

"""Exception hierarchy for progdx.

Three categories of errors:
1. Validation errors - Fail fast before any training or evaluation
2. Checkpoint errors - Stored artifacts that cannot be trusted
3. Critical errors - Abort the running experiment
"""

from collections.abc import Sequence


class ProgdxError(Exception):
    """Base exception for all progdx errors.

    All errors include a message explaining what happened and a suggestion
    for how to fix it.
    """

    def __init__(self, message: str, suggestion: str = "") -> None:
        """Initialize the error.

        Args:
            message: What went wrong
            suggestion: How to fix it
        """
        self.message = message
        self.suggestion = suggestion
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.suggestion:
            return f"{self.message}\n\n{self.suggestion}"
        return self.message


# ============================================================================
# Validation Errors - Fail fast before training or evaluation
# ============================================================================


class ValidationError(ProgdxError):
    """Base class for validation errors."""


class ConfigNotFoundError(ValidationError):
    """Configuration file does not exist."""

    def __init__(self, path: str) -> None:
        super().__init__(
            message=f"Config not found: {path}",
            suggestion="Check that the config path is correct and the file exists.",
        )
        self.path = path


class ConfigParseError(ValidationError):
    """Configuration file is not valid TOML or JSON."""

    def __init__(self, path: str, details: str) -> None:
        super().__init__(
            message=f"Failed to parse config: {path}\n{details}",
            suggestion="Check the config file for TOML or JSON syntax errors.",
        )
        self.path = path
        self.details = details


class ConfigurationError(ValidationError):
    """A configuration value is outside its allowed range."""

    def __init__(self, field_name: str, details: str) -> None:
        super().__init__(
            message=f"Invalid configuration value for '{field_name}': {details}",
            suggestion="Fix the value in the config file or on the command line.",
        )
        self.field_name = field_name
        self.details = details


class CohortNotFoundError(ValidationError):
    """Cohort file does not exist."""

    def __init__(self, path: str) -> None:
        super().__init__(
            message=f"Cohort file not found: {path}",
            suggestion="Generate one with 'progdx synth' or check the --data path.",
        )
        self.path = path


class CohortParseError(ValidationError):
    """A line of the JSON-Lines cohort file is malformed."""

    def __init__(self, path: str, line_number: int, details: str) -> None:
        super().__init__(
            message=f"Failed to parse cohort {path} at line {line_number}\n{details}",
            suggestion="Each line must be one JSON object with 'id', 'label' and 'tabular'.",
        )
        self.path = path
        self.line_number = line_number
        self.details = details


class CohortValidationError(ValidationError):
    """Subject records violate the cohort invariants."""

    def __init__(self, details: str, subject_id: str = "") -> None:
        where = f" (subject '{subject_id}')" if subject_id else ""
        super().__init__(
            message=f"Invalid cohort{where}: {details}",
            suggestion="Fix the record so that PET implies MRI implies tabular data, "
            "ids are unique, and volumes match the configured shape.",
        )
        self.details = details
        self.subject_id = subject_id


class InputError(ValidationError):
    """An operation received an input it cannot work with."""

    def __init__(self, details: str) -> None:
        super().__init__(
            message=f"Invalid input: {details}",
            suggestion="Check the data passed to this operation.",
        )
        self.details = details


class ShapeError(ValidationError):
    """A tensor does not have the dimensions an operation expects."""

    def __init__(self, what: str, expected: Sequence[int] | int, actual: Sequence[int] | int) -> None:
        super().__init__(
            message=f"Shape mismatch for {what}: expected {expected}, got {actual}",
            suggestion="Check that the model dimensions in the config match the data.",
        )
        self.what = what
        self.expected = expected
        self.actual = actual


class DegenerateBatchError(ValidationError):
    """A batch statistic needs more rows than were provided."""

    def __init__(self, rows: int, required: int = 2) -> None:
        super().__init__(
            message=f"Batch has {rows} rows, at least {required} are required",
            suggestion="Increase the batch size.",
        )
        self.rows = rows
        self.required = required


# ============================================================================
# Checkpoint Errors - Stored artifacts that cannot be trusted
# ============================================================================


class CheckpointError(ProgdxError):
    """Base class for checkpoint errors."""


class CheckpointIntegrityError(CheckpointError):
    """Checkpoint file is truncated or corrupt."""

    def __init__(self, path: str, details: str) -> None:
        super().__init__(
            message=f"Checkpoint is corrupt: {path}\n{details}",
            suggestion="Re-run training to produce a fresh checkpoint.",
        )
        self.path = path
        self.details = details


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written with a different format version."""

    def __init__(self, path: str, found: int, expected: int) -> None:
        super().__init__(
            message=f"Unsupported checkpoint format version {found} in {path} "
            f"(expected {expected})",
            suggestion="Re-train with this version of progdx.",
        )
        self.path = path
        self.found = found
        self.expected = expected


# ============================================================================
# Critical Errors - Abort immediately
# ============================================================================


class CriticalTrainingError(ProgdxError):
    """Critical error that requires aborting the experiment."""

    def __init__(self, message: str, suggestion: str = "") -> None:
        if not suggestion:
            suggestion = "Training has been aborted. No checkpoint was written."
        super().__init__(message=message, suggestion=suggestion)


class NonFiniteLossError(CriticalTrainingError):
    """A loss term became NaN or infinite."""

    def __init__(self, term: str, epoch: int, step: int) -> None:
        super().__init__(
            message=f"Non-finite loss term '{term}' at epoch {epoch}, step {step}",
            suggestion="Lower the learning rate or check the input volumes for NaN values.\n"
            "Training has been aborted. No checkpoint was written.",
        )
        self.term = term
        self.epoch = epoch
        self.step = step
