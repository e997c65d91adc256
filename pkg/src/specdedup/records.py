"""Canonical specimen record model and its delimited-row codec."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

# Fixed column order for canonical checkpoint files; documented in the README
# and relied upon by every downstream stage.
CANONICAL_COLUMNS = (
    "record_id",
    "recorded_by",
    "record_number_raw",
    "event_date_raw",
    "event_date",
    "country_code",
    "taxon_order",
    "family",
    "scientific_name",
    "institution_code",
    "type_status_raw",
    "latitude",
    "longitude",
    "media_refs",
)

MEDIA_SEPARATOR = "|"


@dataclass(frozen=True, slots=True)
class SpecimenRecord:
    """One occurrence row mapped onto the canonical field set.

    Instances are immutable so they can be shared freely between
    pipeline stages and worker threads.
    """

    record_id: str
    recorded_by: str = ""
    record_number_raw: str = ""
    event_date_raw: str = ""
    event_date: dt.date | None = None
    country_code: str | None = None
    taxon_order: str | None = None
    family: str | None = None
    scientific_name: str | None = None
    institution_code: str = ""
    type_status_raw: str | None = None
    latitude: float | None = None
    longitude: float | None = None
    media_refs: tuple[str, ...] = ()


def record_to_row(record: SpecimenRecord) -> list[str]:
    """Serialize a record to the fixed canonical column order."""
    return [
        record.record_id,
        record.recorded_by,
        record.record_number_raw,
        record.event_date_raw,
        record.event_date.isoformat() if record.event_date else "",
        record.country_code or "",
        record.taxon_order or "",
        record.family or "",
        record.scientific_name or "",
        record.institution_code,
        record.type_status_raw or "",
        repr(record.latitude) if record.latitude is not None else "",
        repr(record.longitude) if record.longitude is not None else "",
        MEDIA_SEPARATOR.join(record.media_refs),
    ]


def record_from_row(row: list[str]) -> SpecimenRecord:
    """Rebuild a record from a canonical checkpoint row."""
    (
        record_id,
        recorded_by,
        record_number_raw,
        event_date_raw,
        event_date,
        country_code,
        taxon_order,
        family,
        scientific_name,
        institution_code,
        type_status_raw,
        latitude,
        longitude,
        media,
    ) = row[: len(CANONICAL_COLUMNS)]
    return SpecimenRecord(
        record_id=record_id,
        recorded_by=recorded_by,
        record_number_raw=record_number_raw,
        event_date_raw=event_date_raw,
        event_date=dt.date.fromisoformat(event_date) if event_date else None,
        country_code=country_code or None,
        taxon_order=taxon_order or None,
        family=family or None,
        scientific_name=scientific_name or None,
        institution_code=institution_code,
        type_status_raw=type_status_raw or None,
        latitude=float(latitude) if latitude else None,
        longitude=float(longitude) if longitude else None,
        media_refs=tuple(p for p in media.split(MEDIA_SEPARATOR) if p) if media else (),
    )
