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

"""Rendering tabular fields as text.

Each present field becomes one clause, "<value> <field phrase>" followed by
the template suffix. Clauses of a group are joined with "; ":
- personal text t_p: age, education, gender
- healthy text t_h: medical history flags and the blood test
- dementia text t_d: dementia level
"""

from dataclasses import dataclass
from typing import Literal

from progdx.core.cohort import (
    DEMENTIA_FIELDS,
    HEALTH_FIELDS,
    PERSONAL_FIELDS,
    SubjectRecord,
    TabularRecord,
)
from progdx.core.exceptions import ConfigurationError

TemplateId = Literal[1, 2, 3]

TEMPLATE_SUFFIXES: dict[int, str] = {
    1: "",
    2: " subject",
    3: " subject for Alzheimer's Disease diagnosis",
}

CLAUSE_SEPARATOR = "; "

TEXT_COMPONENTS: tuple[str, ...] = ("p", "h", "d")

_HISTORY_PHRASES: dict[str, str] = {
    "heart_attack": "heart attack history",
    "hypertension": "hypertension history",
    "stroke": "stroke history",
    "alcohol_abuse": "alcohol abuse history",
    "psychiatric_disorder": "psychiatric disorder history",
}


@dataclass(frozen=True)
class TextBundle:
    """The three texts of one subject. None marks an absent component."""

    t_p: str | None
    t_h: str | None
    t_d: str | None
    template_id: int

    def components(self) -> tuple[str | None, str | None, str | None]:
        """Texts in (p, h, d) order."""
        return (self.t_p, self.t_h, self.t_d)

    def availability(self) -> tuple[bool, bool, bool]:
        """Presence mask in (p, h, d) order."""
        return (self.t_p is not None, self.t_h is not None, self.t_d is not None)


def check_template_id(template_id: int) -> None:
    """Raise ConfigurationError unless template_id is 1, 2 or 3."""
    if template_id not in TEMPLATE_SUFFIXES:
        raise ConfigurationError(
            "template_id", f"must be one of {sorted(TEMPLATE_SUFFIXES)}, got {template_id!r}"
        )


def field_phrase(name: str, value: object) -> str:
    """Render one field value without the template suffix.

    Args:
        name: Tabular field name
        value: The field's (present) value

    Returns:
        The "<value> <field phrase>" part of the clause
    """
    if name == "age":
        return f"{value} years old"
    if name == "education":
        return f"{value} years of education"
    if name == "gender":
        return f"{value} gender"
    if name in _HISTORY_PHRASES:
        return f"{'positive' if value else 'negative'} {_HISTORY_PHRASES[name]}"
    if name == "blood_test":
        return f"{float(value):.2f} blood test value"  # type: ignore[arg-type]
    if name == "dementia_level":
        return f"CDR {float(value):g} dementia level"  # type: ignore[arg-type]
    raise KeyError(f"No phrase for tabular field '{name}'")


def _render_group(tabular: TabularRecord, names: tuple[str, ...], suffix: str) -> str | None:
    clauses = [
        field_phrase(name, getattr(tabular, name)) + suffix
        for name in names
        if getattr(tabular, name) is not None
    ]
    if not clauses:
        return None
    return CLAUSE_SEPARATOR.join(clauses)


def textualize(record: SubjectRecord, template_id: int) -> TextBundle:
    """Render a record's tabular fields into the personal, healthy and dementia texts.

    Args:
        record: Subject record
        template_id: 1, 2 or 3

    Returns:
        TextBundle; a component is None when all its source fields are missing

    Raises:
        ConfigurationError: If template_id is unknown
    """
    check_template_id(template_id)
    suffix = TEMPLATE_SUFFIXES[template_id]
    return TextBundle(
        t_p=_render_group(record.tabular, PERSONAL_FIELDS, suffix),
        t_h=_render_group(record.tabular, HEALTH_FIELDS, suffix),
        t_d=_render_group(record.tabular, DEMENTIA_FIELDS, suffix),
        template_id=template_id,
    )
