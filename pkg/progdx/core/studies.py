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

"""Multi-run studies: component ablations and the textualization template study.

All runs of a study share one fold split, so their test subjects are the
same and the reports are directly comparable.
"""

from collections.abc import Generator, Sequence
from dataclasses import dataclass, field, replace

import pandas as pd

from progdx.api.events import EvaluationEvent, Event, EventType
from progdx.core.checkpoint import Checkpoint
from progdx.core.cohort import SubjectRecord
from progdx.core.config import TrainConfig
from progdx.core.evaluation import evaluate, reports_table
from progdx.core.exceptions import CohortValidationError, ConfigurationError, CriticalTrainingError
from progdx.core.folds import DatasetSplit, split_folds
from progdx.core.metrics import EvalReport
from progdx.core.model import AblationFlags
from progdx.core.textualize import TEMPLATE_SUFFIXES, check_template_id
from progdx.core.trainer import TrainingWorkflow

ABLATION_VARIANTS: tuple[str, ...] = ("no_disentangle", "no_alignment", "no_fusion", "no_progressive")

BASELINE_LABEL = "full"


@dataclass
class StudyResult:
    """Reports of every run of a study, in run order."""

    labels: list[str] = field(default_factory=list)
    reports: list[EvalReport] = field(default_factory=list)
    checkpoints: dict[str, Checkpoint] = field(default_factory=dict)

    def add(self, label: str, report: EvalReport, checkpoint: Checkpoint) -> None:
        self.labels.append(label)
        self.reports.append(report)
        self.checkpoints[label] = checkpoint

    def report(self, label: str) -> EvalReport:
        return self.reports[self.labels.index(label)]

    def table(self) -> pd.DataFrame:
        return reports_table(self.reports, self.labels)


def train_and_evaluate(
    config: TrainConfig, records: list[SubjectRecord], split: DatasetSplit, label: str
) -> Generator[Event, None, tuple[Checkpoint, EvalReport]]:
    """Train one run and evaluate it on the full-modality test subjects.

    Raises:
        CriticalTrainingError: If the run fails
        CohortValidationError: If the test fold has no full-modality subjects
    """
    test_records = split.test_records(records)
    if not test_records:
        raise CohortValidationError("the test fold holds no subjects with tabular data, MRI and PET")

    result = yield from TrainingWorkflow(config, records, split, run_name=label).execute()
    if not result.success or result.checkpoint is None:
        raise CriticalTrainingError(f"Run '{label}' failed: {result.error_message}")

    report = evaluate(result.checkpoint, test_records)
    yield EvaluationEvent(
        type=EventType.EVALUATION_COMPLETED,
        message=f"{label}: AUC {report.auc:.2f}, Cost {report.cost:.2f}",
        label=label,
        report=report.to_dict(),
    )
    return result.checkpoint, report


def ablation_config(config: TrainConfig, variant: str) -> TrainConfig:
    """Copy of config with one component switched off.

    Raises:
        ConfigurationError: If the variant is unknown
    """
    if variant not in ABLATION_VARIANTS:
        raise ConfigurationError("ablation", f"unknown variant {variant!r}, expected one of {ABLATION_VARIANTS}")
    return replace(config, ablation=AblationFlags(**{variant: True}))


def run_ablation(
    records: list[SubjectRecord], config: TrainConfig, variants: Sequence[str] = ABLATION_VARIANTS
) -> Generator[Event, None, StudyResult]:
    """Train the full model and each ablated variant, then evaluate all of them.

    Yields:
        Events of every run plus one evaluation event per run

    Returns:
        StudyResult labelled "full" followed by the variant names
    """
    runs = [(BASELINE_LABEL, replace(config, ablation=AblationFlags()))]
    runs += [(variant, ablation_config(config, variant)) for variant in variants]
    split = split_folds(records, config.seed, config.rotation)

    study = StudyResult()
    for label, run_config in runs:
        checkpoint, report = yield from train_and_evaluate(run_config, records, split, label)
        study.add(label, report, checkpoint)
    return study


def template_label(template_id: int, disentangle: bool) -> str:
    return f"template {template_id}" + ("" if disentangle else " w/o D")


def run_template_study(
    records: list[SubjectRecord],
    config: TrainConfig,
    template_ids: Sequence[int] = tuple(TEMPLATE_SUFFIXES),
    compare_disentangle: bool = True,
) -> Generator[Event, None, StudyResult]:
    """Train each textualization template, with and without disentanglement.

    Raises:
        ConfigurationError: If a template id is unknown
    """
    for template_id in template_ids:
        check_template_id(template_id)
    split = split_folds(records, config.seed, config.rotation)

    study = StudyResult()
    for template_id in template_ids:
        for disentangle in (True, False) if compare_disentangle else (True,):
            flags = replace(config.ablation, no_disentangle=not disentangle)
            run_config = replace(config, template_id=template_id, ablation=flags)
            label = template_label(template_id, disentangle)
            checkpoint, report = yield from train_and_evaluate(run_config, records, split, label)
            study.add(label, report, checkpoint)
    return study
