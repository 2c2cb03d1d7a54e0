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

"""Event types and dataclasses for the event-driven architecture."""

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Any


class EventType(Enum):
    """Types of events emitted by training and experiment workflows."""

    # Workflow events
    WORKFLOW_STARTED = auto()
    WORKFLOW_COMPLETED = auto()
    WORKFLOW_FAILED = auto()

    # Phase events
    PHASE_STARTED = auto()
    PHASE_COMPLETED = auto()

    # Training events
    EPOCH_COMPLETED = auto()
    CHECKPOINT_IMPROVED = auto()

    # Evaluation events
    EVALUATION_COMPLETED = auto()

    # Warning events
    WARNING = auto()


@dataclass(frozen=True)
class Event:
    """Base event class."""

    type: EventType
    message: str = ""
    data: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class WorkflowEvent(Event):
    """Events related to workflow lifecycle."""

    run_name: str = ""


@dataclass(frozen=True)
class PhaseEvent(Event):
    """Events marking phase boundaries."""

    phase_name: str = ""
    phase_number: int = 0
    total_phases: int = 0


@dataclass(frozen=True)
class EpochEvent(Event):
    """End of one training epoch."""

    epoch: int = 0
    total_epochs: int = 0
    losses: dict[str, float] = field(default_factory=dict)
    val_auc: float | None = None
    val_cost: float | None = None


@dataclass(frozen=True)
class CheckpointEvent(Event):
    """The best validation parameters changed or were written."""

    epoch: int = 0
    metric: float = 0.0
    path: str = ""


@dataclass(frozen=True)
class EvaluationEvent(Event):
    """An evaluation report is ready."""

    label: str = ""
    report: dict[str, Any] = field(default_factory=dict)
