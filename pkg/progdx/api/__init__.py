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

"""API layer for progdx.

Note: ExperimentController is not imported here to avoid circular imports.
Import it directly: from progdx.api.controller import ExperimentController
"""

from progdx.api.events import (
    CheckpointEvent,
    EpochEvent,
    EvaluationEvent,
    Event,
    EventType,
    PhaseEvent,
    WorkflowEvent,
)

__all__ = [
    # Events
    "CheckpointEvent",
    "EpochEvent",
    "EvaluationEvent",
    "Event",
    "EventType",
    "PhaseEvent",
    "WorkflowEvent",
]
