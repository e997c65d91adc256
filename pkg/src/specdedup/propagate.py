"""Annotation flags, propagable-annotation detection and corpus totals.

For each annotation class (georeference, type status, image) a group has
a propagable annotation when some but not all members carry it; the
members without it could receive the value from a duplicate peer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError
from .records import SpecimenRecord

ANNOTATION_CLASSES = ("georef", "typestatus", "image")

# Recognized type-status terms; overridable via a vocabulary file because
# institutional usage varies. Matching is substring on the normalized value.
DEFAULT_TYPE_VOCABULARY = (
    "holotype",
    "isotype",
    "lectotype",
    "isolectotype",
    "neotype",
    "isoneotype",
    "syntype",
    "isosyntype",
    "paratype",
    "epitype",
    "type",
)

_NEGATIVE_STATUS = "notatype"
_NORMALIZE_STATUS = re.compile(r"[\s\-_]+")


@dataclass(frozen=True, slots=True)
class AnnotationFlags:
    georef: bool
    typestatus: bool
    image: bool

    def get(self, annotation_class: str) -> bool:
        return getattr(self, annotation_class)


def load_type_vocabulary(path: str | Path) -> tuple[str, ...]:
    """Read one vocabulary term per line; # comments and blanks ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read type vocabulary {path}: {exc}") from exc
    terms = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.append(_normalize_status(line))
    if not terms:
        raise ConfigError(f"type vocabulary {path} is empty")
    return tuple(terms)


def _normalize_status(raw: str) -> str:
    return _NORMALIZE_STATUS.sub("", raw.strip().casefold())


def has_type_status(
    raw: str | None, vocabulary: Sequence[str] = DEFAULT_TYPE_VOCABULARY
) -> bool:
    """True when the status value names a recognized type designation."""
    if raw is None:
        return False
    normalized = _normalize_status(raw)
    if not normalized or normalized == _NEGATIVE_STATUS:
        return False
    return any(term in normalized for term in vocabulary)


def is_georeferenced(record: SpecimenRecord) -> bool:
    """Valid coordinate pair present and not the (0, 0) null island."""
    lat, lon = record.latitude, record.longitude
    if lat is None or lon is None:
        return False
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return False
    return not (lat == 0.0 and lon == 0.0)


def compute_annotation_flags(
    record: SpecimenRecord, vocabulary: Sequence[str] = DEFAULT_TYPE_VOCABULARY
) -> AnnotationFlags:
    return AnnotationFlags(
        georef=is_georeferenced(record),
        typestatus=has_type_status(record.type_status_raw, vocabulary),
        image=bool(record.media_refs),
    )


@dataclass(frozen=True, slots=True)
class ClassPropagation:
    any_set: bool
    all_set: bool
    count_with: int
    count_without: int

    @property
    def propagable(self) -> bool:
        return self.any_set and not self.all_set


@dataclass(frozen=True, slots=True)
class GroupPropagation:
    duplicate_group_id: int
    size: int
    georef: ClassPropagation
    typestatus: ClassPropagation
    image: ClassPropagation
    name_divergent: bool

    def for_class(self, annotation_class: str) -> ClassPropagation:
        return getattr(self, annotation_class)


def find_propagable(
    members: Sequence[SpecimenRecord],
    group_id: int = 0,
    vocabulary: Sequence[str] = DEFAULT_TYPE_VOCABULARY,
    flags: Sequence[AnnotationFlags] | None = None,
) -> GroupPropagation:
    """Per-class any/all/propagable state and counts for one group.

    Also detects scientific-name divergence: two or more distinct
    (case-folded, whitespace-normalized) names among the members.
    """
    if not members:
        raise ValueError("find_propagable requires a non-empty member list")
    if flags is None:
        flags = [compute_annotation_flags(m, vocabulary) for m in members]
    per_class = {}
    for annotation_class in ANNOTATION_CLASSES:
        with_count = sum(1 for f in flags if f.get(annotation_class))
        per_class[annotation_class] = ClassPropagation(
            any_set=with_count > 0,
            all_set=with_count == len(members),
            count_with=with_count,
            count_without=len(members) - with_count,
        )
    names = {
        " ".join(m.scientific_name.split()).casefold()
        for m in members
        if m.scientific_name
    }
    return GroupPropagation(
        duplicate_group_id=group_id,
        size=len(members),
        georef=per_class["georef"],
        typestatus=per_class["typestatus"],
        image=per_class["image"],
        name_divergent=len(names) >= 2,
    )


@dataclass
class ClassSummary:
    groups_propagable: int = 0
    specimens_receivable: int = 0


@dataclass
class PropagationSummary:
    """Corpus totals over conservative groups, per annotation class."""

    georef: ClassSummary
    typestatus: ClassSummary
    image: ClassSummary
    groups_divergent: int = 0
    specimens_in_divergent_groups: int = 0

    def for_class(self, annotation_class: str) -> ClassSummary:
        return getattr(self, annotation_class)

    def to_json_dict(self) -> dict[str, object]:
        return {
            annotation_class: {
                "groups_propagable": self.for_class(annotation_class).groups_propagable,
                "specimens_receivable": self.for_class(
                    annotation_class
                ).specimens_receivable,
            }
            for annotation_class in ANNOTATION_CLASSES
        } | {
            "name_divergence": {
                "groups_divergent": self.groups_divergent,
                "specimens_in_divergent_groups": self.specimens_in_divergent_groups,
            }
        }


def summarize(propagations: Iterable[GroupPropagation]) -> PropagationSummary:
    """Total receivable annotations; input must be conservative groups only."""
    summary = PropagationSummary(
        georef=ClassSummary(), typestatus=ClassSummary(), image=ClassSummary()
    )
    for group in propagations:
        for annotation_class in ANNOTATION_CLASSES:
            state = group.for_class(annotation_class)
            if state.propagable:
                target = summary.for_class(annotation_class)
                target.groups_propagable += 1
                target.specimens_receivable += state.count_without
        if group.name_divergent:
            summary.groups_divergent += 1
            summary.specimens_in_divergent_groups += group.size
    return summary
