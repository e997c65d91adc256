"""Per-group agreement flags on country code, order and family.

A duplicate group is conservative when all three assessment fields are
internally consistent; only conservative groups feed the propagation and
graph analyses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .dedup import DuplicateGroup
from .records import SpecimenRecord

ASSESSMENT_FIELDS = ("country_code", "taxon_order", "family")

_MISSING = object()


@dataclass(frozen=True, slots=True)
class GroupAssessment:
    duplicate_group_id: int
    countrycode_conservative: bool
    order_conservative: bool
    family_conservative: bool

    @property
    def conservative(self) -> bool:
        return (
            self.countrycode_conservative
            and self.order_conservative
            and self.family_conservative
        )

    @property
    def cell(self) -> tuple[bool, bool, bool]:
        return (
            self.countrycode_conservative,
            self.order_conservative,
            self.family_conservative,
        )


def _field_agrees(
    members: Sequence[SpecimenRecord], field: str, strict_missing: bool
) -> bool:
    values = set()
    for member in members:
        value = getattr(member, field)
        if value is None:
            if strict_missing:
                values.add(_MISSING)
            continue
        values.add(" ".join(value.split()).casefold())
    # Missing-value rule: with no evidence of conflict the flag stays true.
    return len(values) <= 1


def assess_group(
    members: Sequence[SpecimenRecord],
    group_id: int = 0,
    strict_missing: bool = False,
) -> GroupAssessment:
    """Flag whether all members agree on each assessment field.

    Comparison is case-insensitive and whitespace-normalized. Absent
    values are ignored unless strict_missing is set, in which case a
    missing value counts as a distinct value.
    """
    if not members:
        raise ValueError("assess_group requires a non-empty member list")
    return GroupAssessment(
        duplicate_group_id=group_id,
        countrycode_conservative=_field_agrees(members, "country_code", strict_missing),
        order_conservative=_field_agrees(members, "taxon_order", strict_missing),
        family_conservative=_field_agrees(members, "family", strict_missing),
    )


ALL_CELLS = tuple(
    (a, b, c) for a in (True, False) for b in (True, False) for c in (True, False)
)


@dataclass
class CellCount:
    group_count: int = 0
    record_count: int = 0


class FlagCellCounts:
    """Counts of groups and records per assessment-flag combination."""

    def __init__(self) -> None:
        self.cells: dict[tuple[bool, bool, bool], CellCount] = {
            cell: CellCount() for cell in ALL_CELLS
        }

    def add(self, assessment: GroupAssessment, group_size: int) -> None:
        cell = self.cells[assessment.cell]
        cell.group_count += 1
        cell.record_count += group_size

    def rows(self) -> Iterator[list[str]]:
        for cell in ALL_CELLS:
            count = self.cells[cell]
            yield [
                *("true" if flag else "false" for flag in cell),
                str(count.group_count),
                str(count.record_count),
            ]

    def to_json_dict(self) -> list[dict[str, object]]:
        return [
            {
                "countrycode_conservative": cell[0],
                "order_conservative": cell[1],
                "family_conservative": cell[2],
                "group_count": count.group_count,
                "record_count": count.record_count,
            }
            for cell, count in self.cells.items()
        ]

    def totals(self) -> tuple[int, int]:
        groups = sum(c.group_count for c in self.cells.values())
        records = sum(c.record_count for c in self.cells.values())
        return groups, records


def conservative_filter(
    groups: Iterable[DuplicateGroup],
    assessments: Mapping[int, GroupAssessment],
) -> tuple[list[DuplicateGroup], FlagCellCounts]:
    """Select conservative groups and tally every flag combination."""
    cells = FlagCellCounts()
    kept: list[DuplicateGroup] = []
    for group in groups:
        assessment = assessments[group.duplicate_group_id]
        cells.add(assessment, group.size)
        if assessment.conservative:
            kept.append(group)
    return kept, cells
