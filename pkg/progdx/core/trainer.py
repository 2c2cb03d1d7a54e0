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

"""Training workflow.

Coordinates a training run:
1. Validate the cohort and split it into folds
2. Build the model and encode the inputs
3. Train with SGD, validating after every epoch
4. Package (and optionally save) the best-validation checkpoint
"""

import math
from collections.abc import Generator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import torch

from progdx.api.events import (
    CheckpointEvent,
    EpochEvent,
    Event,
    EventType,
    PhaseEvent,
    WorkflowEvent,
)
from progdx.core.checkpoint import Checkpoint, save_checkpoint, torch_rng_state
from progdx.core.cohort import SubjectRecord, validate_cohort
from progdx.core.config import TrainConfig
from progdx.core.evaluation import evaluate_model
from progdx.core.exceptions import CriticalTrainingError, InputError, NonFiniteLossError, ProgdxError
from progdx.core.folds import DatasetSplit, split_folds
from progdx.core.guidelines import guideline_corpus
from progdx.core.metrics import EvalReport
from progdx.core.model import CohortTensors, ProgressiveDiagnosisModel
from progdx.core.progressive import total_loss


@dataclass
class TrainResult:
    """Result summary from a training run."""

    checkpoint: Checkpoint | None = None
    history: list[dict[str, Any]] = field(default_factory=list)
    best_epoch: int = 0
    best_val_auc: float | None = None
    checkpoint_path: Path | None = None
    success: bool = True
    error_message: str = ""
    error: ProgdxError | None = None


def stratified_batches(
    tiers: npt.NDArray[np.int64], batch_size: int, rng: np.random.Generator
) -> list[npt.NDArray[np.int64]]:
    """Shuffle row indices and deal each availability tier across the batches.

    Every batch receives a near-equal share of every tier, so full-modality
    subjects appear in all batches as long as there are enough of them.
    """
    n_batches = max(1, math.ceil(len(tiers) / batch_size))
    shares: list[list[npt.NDArray[np.int64]]] = [[] for _ in range(n_batches)]
    for tier in np.unique(tiers):
        rows = rng.permutation(np.flatnonzero(tiers == tier))
        for b, chunk in enumerate(np.array_split(rows, n_batches)):
            shares[b].append(chunk)
    batches = [np.concatenate(parts).astype(np.int64) for parts in shares]
    return [np.sort(batch) for batch in batches if batch.size]


class TrainingWorkflow:
    """Orchestrates one training run."""

    TOTAL_PHASES = 4

    def __init__(
        self,
        config: TrainConfig,
        records: list[SubjectRecord],
        split: DatasetSplit | None = None,
        out_path: Path | None = None,
        run_name: str = "",
    ) -> None:
        """Initialize the workflow.

        Args:
            config: Training configuration
            records: The whole cohort
            split: Fold split (default: split_folds with the config seed and rotation)
            out_path: Where to write the checkpoint, if anywhere
            run_name: Label used in events
        """
        self.config = config
        self.records = records
        self.split = split
        self.out_path = out_path
        self.run_name = run_name or config.ablation.label
        self.result = TrainResult()

        # Components initialized during execution
        self._model: ProgressiveDiagnosisModel | None = None
        self._optimizer: torch.optim.Optimizer | None = None
        self._train_records: list[SubjectRecord] = []
        self._validation_records: list[SubjectRecord] = []
        self._train: CohortTensors | None = None
        self._validation: CohortTensors | None = None

    @property
    def model(self) -> ProgressiveDiagnosisModel:
        """Get the model being trained."""
        if self._model is None:
            raise CriticalTrainingError("Model not built")
        return self._model

    def execute(self) -> Generator[Event, None, TrainResult]:
        """Execute the training run.

        Yields:
            Events throughout the run

        Returns:
            TrainResult with the checkpoint and metric history
        """
        yield WorkflowEvent(
            type=EventType.WORKFLOW_STARTED,
            message=f"Starting training run '{self.run_name}'",
            run_name=self.run_name,
        )

        try:
            yield from self._phase_prepare_data()
            yield from self._phase_build_model()
            yield from self._phase_train()
            yield from self._phase_package()

            self.result.success = True
            yield WorkflowEvent(
                type=EventType.WORKFLOW_COMPLETED,
                message="Training completed successfully",
                run_name=self.run_name,
            )

        except ProgdxError as e:
            self.result.success = False
            self.result.error_message = e.message
            self.result.error = e
            yield WorkflowEvent(type=EventType.WORKFLOW_FAILED, message=str(e), run_name=self.run_name)

        except Exception as e:
            self.result.success = False
            self.result.error_message = str(e)
            yield WorkflowEvent(
                type=EventType.WORKFLOW_FAILED,
                message=f"Unexpected error: {e}",
                run_name=self.run_name,
            )

        return self.result

    def _emit_phase(self, phase_num: int, name: str, started: bool = True) -> PhaseEvent:
        """Create a phase event."""
        return PhaseEvent(
            type=EventType.PHASE_STARTED if started else EventType.PHASE_COMPLETED,
            message=f"{'Starting' if started else 'Completed'}: {name}",
            phase_name=name,
            phase_number=phase_num,
            total_phases=self.TOTAL_PHASES,
        )

    def _phase_prepare_data(self) -> Generator[Event, None, None]:
        """Phase 1: Validate the cohort and split folds."""
        yield self._emit_phase(1, "Preparing data")

        cfg = self.config
        validate_cohort(self.records, cfg.model.volume_shape)
        if self.split is None:
            self.split = split_folds(self.records, cfg.seed, cfg.rotation)
        self._train_records = self.split.select(self.records, "train")
        if len(self._train_records) < 2:
            raise InputError("the training folds hold fewer than two subjects")
        self._validation_records = [
            r for r in self.split.select(self.records, "validation") if r.has_full_modalities
        ]
        if not self._validation_records:
            yield Event(
                type=EventType.WARNING,
                message="No full-modality validation subjects; keeping the last epoch",
            )

        yield self._emit_phase(1, "Preparing data", started=False)

    def _phase_build_model(self) -> Generator[Event, None, None]:
        """Phase 2: Seed, build the model, encode the inputs, set up SGD."""
        yield self._emit_phase(2, "Building model")

        cfg = self.config
        torch.manual_seed(cfg.seed)
        torch.set_num_threads(cfg.num_threads)
        corpus_path = Path(cfg.guideline_corpus) if cfg.guideline_corpus else None
        self._model = ProgressiveDiagnosisModel.build(
            cfg.model, cfg.ablation, guideline_corpus(corpus_path), cfg.template_id
        )
        self._train = self.model.prepare(self._train_records)
        if self._validation_records:
            self._validation = self.model.prepare(self._validation_records)
        self._optimizer = torch.optim.SGD(self.model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)

        n_params = sum(p.numel() for p in self.model.parameters() if p.requires_grad)
        yield PhaseEvent(
            type=EventType.PHASE_COMPLETED,
            message=f"Completed: Building model ({n_params} trainable parameters)",
            data={"parameters": n_params, "train_subjects": len(self._train)},
            phase_name="Building model",
            phase_number=2,
            total_phases=self.TOTAL_PHASES,
        )

    def _phase_train(self) -> Generator[Event, None, None]:
        """Phase 3: Run the epochs."""
        yield self._emit_phase(3, "Training")

        cfg = self.config
        assert self._train is not None and self._optimizer is not None
        optimizer = self._optimizer
        policy = cfg.effective_policy
        rng = np.random.default_rng(cfg.seed)
        best_auc = -math.inf
        best_state: dict[str, torch.Tensor] | None = None

        for epoch in range(1, cfg.epochs + 1):
            self.model.train()
            sums: dict[str, float] = {}
            steps = 0
            for step, rows in enumerate(stratified_batches(self._train.tiers, cfg.batch_size, rng), start=1):
                outputs = self.model.forward_batch(self._train.index(rows))
                breakdown = total_loss(
                    outputs, policy, use_alignment=not cfg.ablation.no_alignment, weights=cfg.loss
                )
                bad_term = breakdown.first_non_finite()
                if bad_term is not None:
                    raise NonFiniteLossError(bad_term, epoch, step)

                optimizer.zero_grad()
                breakdown.total.backward()
                if cfg.max_grad_norm > 0:
                    torch.nn.utils.clip_grad_norm_(self.model.parameters(), max_norm=cfg.max_grad_norm)
                optimizer.step()

                for name, value in breakdown.as_floats().items():
                    sums[name] = sums.get(name, 0.0) + value
                steps += 1

            losses = {name: total / steps for name, total in sums.items()}
            report = self._validate()
            record: dict[str, Any] = {"epoch": epoch, "losses": losses}
            if report is not None:
                record["validation"] = report.to_dict()
            self.result.history.append(record)

            yield EpochEvent(
                type=EventType.EPOCH_COMPLETED,
                message=f"Epoch {epoch}/{cfg.epochs}: loss {losses['total']:.4f}",
                epoch=epoch,
                total_epochs=cfg.epochs,
                losses=losses,
                val_auc=report.auc if report else None,
                val_cost=report.cost if report else None,
            )

            score = report.auc if report is not None and not math.isnan(report.auc) else None
            if report is None or (score is not None and score > best_auc):
                if score is not None:
                    best_auc = score
                    self.result.best_val_auc = score
                self.result.best_epoch = epoch
                best_state = {k: v.detach().clone() for k, v in self.model.state_dict().items()}
                if report is not None:
                    yield CheckpointEvent(
                        type=EventType.CHECKPOINT_IMPROVED,
                        message=f"Validation AUC improved to {score:.2f}",
                        epoch=epoch,
                        metric=best_auc,
                    )

        if best_state is not None:
            self.model.load_state_dict(best_state)

        yield self._emit_phase(3, "Training", started=False)

    def _validate(self) -> EvalReport | None:
        if self._validation is None:
            return None
        return evaluate_model(
            self.model, self._validation, self.config.effective_policy, self.config.score_source
        )

    def _phase_package(self) -> Generator[Event, None, None]:
        """Phase 4: Build the checkpoint and write it if requested."""
        yield self._emit_phase(4, "Saving checkpoint")

        self.model.eval()
        checkpoint = Checkpoint.from_model(
            self.model,
            self.config,
            epoch=self.config.epochs,
            best_epoch=self.result.best_epoch,
            rng_state=torch_rng_state(),
            history=self.result.history,
        )
        self.result.checkpoint = checkpoint
        if self.out_path is not None:
            self.result.checkpoint_path = save_checkpoint(checkpoint, self.out_path)
            yield CheckpointEvent(
                type=EventType.CHECKPOINT_IMPROVED,
                message=f"Checkpoint written to {self.out_path}",
                epoch=self.result.best_epoch,
                metric=self.result.best_val_auc or 0.0,
                path=str(self.out_path),
            )

        yield self._emit_phase(4, "Saving checkpoint", started=False)


def run_to_completion(workflow: Generator[Event, None, Any]) -> Any:
    """Drain a workflow generator and return its result."""
    while True:
        try:
            next(workflow)
        except StopIteration as e:
            return e.value


def train(
    records: list[SubjectRecord],
    config: TrainConfig,
    split: DatasetSplit | None = None,
    out_path: Path | None = None,
) -> TrainResult:
    """Train without observing events.

    Raises:
        CriticalTrainingError: If the run fails
    """
    result: TrainResult = run_to_completion(TrainingWorkflow(config, records, split, out_path).execute())
    if not result.success:
        # Critical errors already carry their own suggestion
        suggestion = result.error.suggestion if isinstance(result.error, CriticalTrainingError) else ""
        raise CriticalTrainingError(result.error_message, suggestion)
    return result
