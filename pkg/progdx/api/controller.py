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

"""Controller API for all UIs.

Provides a thin wrapper around the workflows and core modules, resolving
paths against a project root and loading configs and cohorts.
"""

from collections.abc import Generator, Sequence
from pathlib import Path

from progdx.api.events import Event
from progdx.core.checkpoint import Checkpoint, load_checkpoint
from progdx.core.cohort import SubjectRecord, load_cohort, save_cohort
from progdx.core.config import TrainConfig, load_train_config
from progdx.core.evaluation import evaluate, sweep_threshold
from progdx.core.exceptions import InputError
from progdx.core.folds import split_folds
from progdx.core.metrics import EvalReport
from progdx.core.model import AblationFlags
from progdx.core.studies import ABLATION_VARIANTS, StudyResult, run_ablation, run_template_study
from progdx.core.synthetic import SynthConfig, load_synth_config, synthesize_cohort
from progdx.core.textualize import TextBundle, textualize
from progdx.core.trainer import TrainingWorkflow, TrainResult


class ExperimentController:
    """Entry point for all UIs to interact with progdx core."""

    def __init__(self, project_root: Path | None = None) -> None:
        """Initialize the controller.

        Args:
            project_root: Directory that relative config, data and
                checkpoint paths are resolved against.
        """
        self.project_root = project_root or Path.cwd()

    def _resolve(self, path: Path) -> Path:
        # Handle relative paths
        return path if path.is_absolute() else self.project_root / path

    def load_config(self, config_path: Path | None = None) -> TrainConfig:
        """Load a training config, or the defaults when no path is given.

        Raises:
            ConfigNotFoundError: If the file does not exist
            ConfigParseError: If the file is invalid
            ConfigurationError: If a value is out of range
        """
        if config_path is None:
            return TrainConfig()
        return load_train_config(self._resolve(config_path))

    def load_cohort(self, data_path: Path) -> list[SubjectRecord]:
        """Load a cohort directory or JSON-Lines file.

        Raises:
            CohortNotFoundError: If the path does not exist
            CohortParseError: If a line is malformed
            CohortValidationError: If records violate the cohort invariants
        """
        return load_cohort(self._resolve(data_path))

    def load_checkpoint(self, checkpoint_path: Path) -> Checkpoint:
        return load_checkpoint(self._resolve(checkpoint_path))

    def synthesize(self, out_dir: Path, seed: int, config_path: Path | None = None) -> tuple[Path, int]:
        """Generate a synthetic cohort and write it to out_dir.

        Returns:
            Path of the cohort file and the number of subjects written
        """
        cfg = load_synth_config(self._resolve(config_path)) if config_path else SynthConfig()
        records = synthesize_cohort(cfg, seed)
        return save_cohort(records, self._resolve(out_dir)), len(records)

    def test_subjects(self, data_path: Path, checkpoint: Checkpoint) -> list[SubjectRecord]:
        """Full-modality subjects of the test fold used when the checkpoint was trained."""
        records = self.load_cohort(data_path)
        split = split_folds(records, checkpoint.config.seed, checkpoint.config.rotation)
        return split.test_records(records)

    def train(
        self,
        data_path: Path,
        config_path: Path | None = None,
        out_path: Path | None = None,
        config: TrainConfig | None = None,
    ) -> Generator[Event, None, TrainResult]:
        """Run the training workflow.

        Args:
            data_path: Cohort directory or file
            config_path: Training config file (ignored when config is given)
            out_path: Where to write the checkpoint
            config: Already loaded config

        Yields:
            Events throughout the run

        Returns:
            TrainResult with the checkpoint and history
        """
        cfg = config or self.load_config(config_path)
        records = self.load_cohort(data_path)
        workflow = TrainingWorkflow(
            cfg, records, out_path=self._resolve(out_path) if out_path else None
        )
        result = yield from workflow.execute()
        return result

    def evaluate(self, checkpoint_path: Path, data_path: Path, theta: float | None = None) -> EvalReport:
        """Evaluate a checkpoint on its test fold."""
        checkpoint = self.load_checkpoint(checkpoint_path)
        return evaluate(checkpoint, self.test_subjects(data_path, checkpoint), theta)

    def sweep(self, checkpoint_path: Path, data_path: Path, thetas: Sequence[float]) -> list[EvalReport]:
        """Evaluate a checkpoint at several thresholds."""
        checkpoint = self.load_checkpoint(checkpoint_path)
        return sweep_threshold(checkpoint, self.test_subjects(data_path, checkpoint), thetas)

    def ablate(
        self,
        data_path: Path,
        config_path: Path | None = None,
        flags: AblationFlags | None = None,
    ) -> Generator[Event, None, StudyResult]:
        """Train the full model and the requested ablations (all of them if none are set)."""
        cfg = self.load_config(config_path)
        variants = flags.enabled() if flags and flags.enabled() else list(ABLATION_VARIANTS)
        result = yield from run_ablation(self.load_cohort(data_path), cfg, variants)
        return result

    def template_study(
        self,
        data_path: Path,
        config_path: Path | None = None,
        template_ids: Sequence[int] = (1, 2, 3),
    ) -> Generator[Event, None, StudyResult]:
        """Train the given templates with and without disentanglement."""
        cfg = self.load_config(config_path)
        result = yield from run_template_study(self.load_cohort(data_path), cfg, template_ids)
        return result

    def show_text(self, data_path: Path, subject_id: str, template_id: int) -> TextBundle:
        """Render one subject's texts.

        Raises:
            InputError: If no subject has that id
        """
        for record in self.load_cohort(data_path):
            if record.id == subject_id:
                return textualize(record, template_id)
        raise InputError(f"no subject with id '{subject_id}'")
