"""Shared fixtures: the worked-example duplicate sets from the two
published collection events (Zika 26185 / Hutchison 5738)."""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path

import pytest

from specdedup.records import SpecimenRecord

# (recorded_by, record_number, institution, scientific_name,
#  typestatus?, georeferenced?, imaged?)
ZIKA_ROWS = [
    ("Zika, Peter F.", "26185", "CAS", "Sedum citrinum Zika", True, True, False),
    ("Peter F. Zika", "26185", "CAS-BOT-BC", "Sedum citrinum Zika", False, False, False),
    ("P. F. Zika", "26185", "CHSC", "Sedum citrinum Zika", False, True, False),
    ("Zika, P.F.", "26185", "K", "Sedum citrinum Zika", True, False, True),
    ("P. F. Zika", "26185", "NY", "Sedum citrinum Zika", True, True, True),
    ("Peter F. Zika", "26185", "RSA", "Sedum citrinum Zika", False, True, False),
    ("Peter F. Zika", "26185", "UC", "Sedum citrinum Zika", False, True, False),
    ("P. F. Zika", "26185", "US", "Sedum citrinum Zika", True, False, True),
]

HUTCHISON_ROWS = [
    ("P. C. Hutchison & J. K. Wright", "5738", "F",
     "Solanum sanchez-vegae S.Knapp", True, False, True),
    ("P. C. Hutchison & J. K. Wright", "5738", "F",
     "Solanum aligerum Schltdl.", False, False, False),
    ("Hutchison, P.C.", "5738", "K",
     "Solanum sanchez-vegae S.Knapp", True, True, True),
    ("Paul C. Hutchison|J. Kenneth Wright", "Hutchison 5738", "MO",
     "Solanum cutervanum Zahlbr.", False, False, False),
    ("P. C. Hutchison", "5738", "NY",
     "Solanum sanchez-vegae S.Knapp", True, True, True),
    ("P. C. Hutchison", "5738", "NY",
     "Solanum sanchez-vegae S.Knapp", True, True, True),
    ("P. C. Hutchison & J. K. Wright", "5738", "US",
     "Solanum sanchez-vegae S.Knapp", True, False, True),
]

ZIKA_INSTITUTIONS = sorted({row[2] for row in ZIKA_ROWS})
HUTCHISON_INSTITUTIONS = sorted({row[2] for row in HUTCHISON_ROWS})


def _record(
    record_id: str,
    row: tuple,
    date: dt.date,
    country: str,
    order: str,
    family: str,
    coords: tuple[float, float],
) -> SpecimenRecord:
    recorded_by, number, institution, name, has_type, has_georef, has_image = row
    return SpecimenRecord(
        record_id=record_id,
        recorded_by=recorded_by,
        record_number_raw=number,
        event_date_raw=date.isoformat(),
        event_date=date,
        country_code=country,
        taxon_order=order,
        family=family,
        scientific_name=name,
        institution_code=institution,
        type_status_raw="isotype" if has_type else None,
        latitude=coords[0] if has_georef else None,
        longitude=coords[1] if has_georef else None,
        media_refs=(f"https://img.example/{record_id}",) if has_image else (),
    )


def zika_records() -> list[SpecimenRecord]:
    date = dt.date(2013, 6, 9)
    return [
        _record(f"zika-{i}", row, date, "US", "Saxifragales", "Crassulaceae",
                (41.94, -123.94))
        for i, row in enumerate(ZIKA_ROWS, start=1)
    ]


def hutchison_records() -> list[SpecimenRecord]:
    date = dt.date(1964, 6, 19)
    return [
        _record(f"hutch-{i}", row, date, "PE", "Solanales", "Solanaceae",
                (-6.72, -77.87))
        for i, row in enumerate(HUTCHISON_ROWS, start=1)
    ]


@pytest.fixture
def worked_example_records() -> list[SpecimenRecord]:
    return zika_records() + hutchison_records()


@pytest.fixture
def worked_example_file(tmp_path: Path) -> Path:
    """The fifteen digitised worked-example rows as a Darwin Core style TSV."""
    path = tmp_path / "worked_examples.tsv"
    records = zika_records() + hutchison_records()
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(
            ["occurrenceID", "recordedBy", "recordNumber", "eventDate", "countryCode",
             "order", "family", "scientificName", "institutionCode", "typeStatus",
             "decimalLatitude", "decimalLongitude", "associatedMedia"]
        )
        for r in records:
            writer.writerow(
                [r.record_id, r.recorded_by, r.record_number_raw, r.event_date_raw,
                 r.country_code, r.taxon_order, r.family, r.scientific_name,
                 r.institution_code, r.type_status_raw or "",
                 "" if r.latitude is None else repr(r.latitude),
                 "" if r.longitude is None else repr(r.longitude),
                 "|".join(r.media_refs)]
            )
    return path
