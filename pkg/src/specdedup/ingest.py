"""Parse occurrence data from delimited files or Darwin Core archives.

Maps source columns onto the canonical record model and applies the
eligibility filter (numeric record number, day-precise date, non-empty
collector string).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import re
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import IngestError
from .records import MEDIA_SEPARATOR, SpecimenRecord

# Mapping keys are canonical record field names; these four must resolve.
MANDATORY_FIELDS = (
    "recorded_by",
    "record_number_raw",
    "event_date_raw",
    "institution_code",
)

OPTIONAL_FIELDS = (
    "record_id",
    "country_code",
    "taxon_order",
    "family",
    "scientific_name",
    "type_status_raw",
    "latitude",
    "longitude",
    "media_refs",
)

# Default source column names follow Darwin Core terms.
DWC_DEFAULT_COLUMNS = {
    "record_id": "occurrenceID",
    "recorded_by": "recordedBy",
    "record_number_raw": "recordNumber",
    "event_date_raw": "eventDate",
    "country_code": "countryCode",
    "taxon_order": "order",
    "family": "family",
    "scientific_name": "scientificName",
    "institution_code": "institutionCode",
    "type_status_raw": "typeStatus",
    "latitude": "decimalLatitude",
    "longitude": "decimalLongitude",
    "media_refs": "associatedMedia",
}

# Local names of Darwin Core term URIs accepted in archive meta.xml files.
_TERM_TO_FIELD = {v: k for k, v in DWC_DEFAULT_COLUMNS.items()}

csv.field_size_limit(4 * 1024 * 1024)


@dataclass
class ColumnMapping:
    """Canonical field -> source column mapping plus delimited-format options.

    Column values may be header names or zero-based column indices given
    as digit strings (mandatory for headerless files).
    """

    columns: dict[str, str] = field(default_factory=lambda: dict(DWC_DEFAULT_COLUMNS))
    delimiter: str = "\t"
    quotechar: str = '"'
    has_header: bool = True

    def validate(self) -> None:
        known = set(MANDATORY_FIELDS) | set(OPTIONAL_FIELDS)
        for name in self.columns:
            if name not in known:
                raise IngestError(f"unknown canonical field in mapping: {name!r}")
        missing = [f for f in MANDATORY_FIELDS if not self.columns.get(f)]
        if missing:
            raise IngestError(
                "mapping lacks mandatory fields: " + ", ".join(sorted(missing))
            )
        if len(self.delimiter) != 1:
            raise IngestError(f"delimiter must be one character, got {self.delimiter!r}")
        if len(self.quotechar) != 1:
            raise IngestError(f"quotechar must be one character, got {self.quotechar!r}")


def load_mapping_file(path: str | Path) -> ColumnMapping:
    """Read a key=value mapping file.

    Keys are canonical field names; the reserved keys ``delimiter``
    (``tab``, ``comma`` or a literal character), ``quotechar`` and
    ``header`` (true/false) set the delimited-format options.
    """
    mapping = ColumnMapping(columns={})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read mapping file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IngestError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "delimiter":
            mapping.delimiter = {"tab": "\t", "comma": ","}.get(value, value)
        elif key == "quotechar":
            mapping.quotechar = value
        elif key == "header":
            mapping.has_header = value.lower() not in ("false", "no", "0")
        else:
            mapping.columns[key] = value
    mapping.validate()
    return mapping


@dataclass
class ParseStats:
    """Row accounting for one parsed source; rows_read counts data rows only."""

    rows_read: int = 0
    rows_skipped: int = 0
    id_collisions: int = 0


def ensure_unique_ids(
    records: Iterable[SpecimenRecord], stats: ParseStats | None = None
) -> Iterator[SpecimenRecord]:
    """Suffix repeated record ids so they stay unique within one run.

    Dirty sources can repeat occurrence identifiers; silently merging
    distinct rows would corrupt the grouping partition downstream.
    """
    seen: set[str] = set()
    collisions = 0
    for record in records:
        if record.record_id in seen:
            collisions += 1
            if stats is not None:
                stats.id_collisions = collisions
            values = {f: getattr(record, f) for f in record.__dataclass_fields__}
            values["record_id"] = f"{record.record_id}#dup{collisions}"
            record = SpecimenRecord(**values)
        seen.add(record.record_id)
        yield record


_DATE_YMD = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_DATE_COMPACT = re.compile(r"^(\d{4})(\d{2})(\d{2})$")


def parse_event_date(raw: str) -> dt.date | None:
    """Return the calendar date when raw encodes exactly one day.

    Accepted forms: YYYY-MM-DD, YYYY-MM-DDThh:mm:ss..., YYYYMMDD.
    Year-only and month-only values, ranges and unparseable strings
    yield None; absence is the signal, never an error.
    """
    raw = raw.strip()
    if not raw:
        return None
    if "T" in raw:
        raw = raw.split("T", 1)[0]
    m = _DATE_YMD.match(raw) or _DATE_COMPACT.match(raw)
    if not m:
        return None
    try:
        return dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except ValueError:
        return None


_HAS_DIGIT = re.compile(r"\d")


def is_eligible(record: SpecimenRecord) -> bool:
    """True iff the record can take part in duplicate detection.

    Requires a numeric component in the record number, a day-precise
    event date and a non-blank collector string.
    """
    return (
        bool(_HAS_DIGIT.search(record.record_number_raw))
        and record.event_date is not None
        and bool(record.recorded_by.strip())
    )


def parse_source(
    path: str | Path,
    mapping: ColumnMapping | None = None,
    stats: ParseStats | None = None,
) -> Iterator[SpecimenRecord]:
    """Stream canonical records from a delimited file or Darwin Core archive.

    Malformed rows (wrong column count) are counted in ``stats`` and
    skipped; undecodable bytes are replaced, never fatal. Raises
    IngestError when the file is unreadable or a mandatory column
    cannot be resolved.
    """
    path = Path(path)
    if mapping is None:
        mapping = ColumnMapping()
    mapping.validate()
    if stats is None:
        stats = ParseStats()
    if zipfile.is_zipfile(path):
        yield from _parse_archive(path, mapping, stats)
    else:
        yield from _parse_delimited(path, mapping, stats)


def _parse_delimited(
    path: Path, mapping: ColumnMapping, stats: ParseStats
) -> Iterator[SpecimenRecord]:
    try:
        handle = open(path, encoding="utf-8", errors="replace", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(
            _strip_nuls(handle), delimiter=mapping.delimiter, quotechar=mapping.quotechar
        )
        header: list[str] | None = None
        if mapping.has_header:
            header = next(reader, None)
            if header is None:
                return
        indices = _resolve_indices(mapping.columns, header, str(path))
        yield from _rows_to_records(reader, indices, header, str(path), stats)


def _parse_archive(
    path: Path, mapping: ColumnMapping, stats: ParseStats
) -> Iterator[SpecimenRecord]:
    """Parse the core data file of a Darwin Core archive zip.

    Column resolution uses the term URIs declared in meta.xml; the
    explicit mapping's format options are ignored in favour of the
    archive's own declarations.
    """
    with zipfile.ZipFile(path) as zf:
        names = {Path(n).name: n for n in zf.namelist()}
        if "meta.xml" not in names:
            raise IngestError(f"{path}: archive has no meta.xml")
        core_file, indices, delimiter, quotechar, skip_lines, encoding = _read_meta(
            zf.read(names["meta.xml"]), str(path)
        )
        if core_file not in names:
            raise IngestError(f"{path}: core data file {core_file!r} not in archive")
        quoting = csv.QUOTE_NONE if quotechar is None else csv.QUOTE_MINIMAL
        with zf.open(names[core_file]) as raw:
            text = io.TextIOWrapper(raw, encoding=encoding, errors="replace", newline="")
            reader = csv.reader(
                _strip_nuls(text),
                delimiter=delimiter,
                quotechar=quotechar or '"',
                quoting=quoting,
            )
            for _ in range(skip_lines):
                next(reader, None)
            yield from _rows_to_records(reader, indices, None, str(path), stats)


def _read_meta(
    data: bytes, source: str
) -> tuple[str, dict[str, int], str, str | None, int, str]:
    import xml.etree.ElementTree as ET

    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise IngestError(f"{source}: cannot parse meta.xml: {exc}") from exc
    core = next((el for el in root.iter() if _local(el.tag) == "core"), None)
    if core is None:
        raise IngestError(f"{source}: meta.xml declares no core data file")
    location = next((el for el in core.iter() if _local(el.tag) == "location"), None)
    if location is None or not (location.text or "").strip():
        raise IngestError(f"{source}: archive lacks a core data file location")
    delimiter = _unescape(core.get("fieldsTerminatedBy", "\\t")) or "\t"
    quotechar = _unescape(core.get("fieldsEnclosedBy", "")) or None
    skip_lines = int(core.get("ignoreHeaderLines", "0") or 0)
    encoding = core.get("encoding", "utf-8") or "utf-8"

    indices: dict[str, int] = {}
    for el in core.iter():
        if _local(el.tag) != "field":
            continue
        term = (el.get("term") or "").rstrip("/").rsplit("/", 1)[-1]
        index = el.get("index")
        if index is None:
            continue
        fld = _TERM_TO_FIELD.get(term)
        if fld and fld not in indices:
            indices[fld] = int(index)
    id_el = next((el for el in core.iter() if _local(el.tag) == "id"), None)
    if "record_id" not in indices and id_el is not None and id_el.get("index"):
        indices["record_id"] = int(id_el.get("index"))
    missing = [f for f in MANDATORY_FIELDS if f not in indices]
    if missing:
        raise IngestError(
            f"{source}: meta.xml does not declare mandatory terms for: "
            + ", ".join(sorted(missing))
        )
    return (
        Path(location.text.strip()).name,
        indices,
        delimiter,
        quotechar,
        skip_lines,
        encoding,
    )


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _unescape(value: str) -> str:
    return value.encode("utf-8").decode("unicode_escape")


def _strip_nuls(lines: Iterable[str]) -> Iterator[str]:
    # NUL bytes in dirty exports would abort the csv reader mid-stream.
    for line in lines:
        yield line.replace("\0", "")


def _resolve_indices(
    columns: dict[str, str], header: list[str] | None, source: str
) -> dict[str, int]:
    indices: dict[str, int] = {}
    missing: list[str] = []
    for fld, column in columns.items():
        if not column:
            continue
        if header is not None and column in header:
            indices[fld] = header.index(column)
        elif column.isdigit():
            indices[fld] = int(column)
        elif fld in MANDATORY_FIELDS:
            missing.append(f"{fld} ({column!r})")
    if missing:
        raise IngestError(f"{source}: columns not found: " + ", ".join(sorted(missing)))
    return indices


def _rows_to_records(
    reader: Iterator[list[str]],
    indices: dict[str, int],
    header: list[str] | None,
    source: str,
    stats: ParseStats,
) -> Iterator[SpecimenRecord]:
    expected = len(header) if header is not None else None
    width = max(indices.values()) + 1
    for row in reader:
        if not row:
            continue
        stats.rows_read += 1
        if (expected is not None and len(row) != expected) or len(row) < width:
            stats.rows_skipped += 1
            continue
        yield _build_record(row, indices, source, stats.rows_read)


def _build_record(
    row: list[str], indices: dict[str, int], source: str, row_number: int
) -> SpecimenRecord:
    def get(fld: str) -> str:
        i = indices.get(fld)
        return row[i].strip() if i is not None else ""

    record_id = get("record_id") or f"{source}:{row_number}"
    date_raw = get("event_date_raw")
    country = get("country_code").upper()
    latitude, longitude = _parse_coordinates(get("latitude"), get("longitude"))
    media = tuple(
        p.strip() for p in get("media_refs").split(MEDIA_SEPARATOR) if p.strip()
    )
    return SpecimenRecord(
        record_id=record_id,
        recorded_by=get("recorded_by"),
        record_number_raw=get("record_number_raw"),
        event_date_raw=date_raw,
        event_date=parse_event_date(date_raw),
        country_code=country if re.fullmatch(r"[A-Z]{2}", country) else None,
        taxon_order=get("taxon_order") or None,
        family=get("family") or None,
        scientific_name=get("scientific_name") or None,
        institution_code=get("institution_code"),
        type_status_raw=get("type_status_raw") or None,
        latitude=latitude,
        longitude=longitude,
        media_refs=media,
    )


def _parse_coordinates(lat_raw: str, lon_raw: str) -> tuple[float | None, float | None]:
    # Coordinates are kept only as a valid pair; half-present or
    # out-of-range values are dropped so the record invariant holds.
    try:
        lat = float(lat_raw)
        lon = float(lon_raw)
    except ValueError:
        return None, None
    if -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0:
        return lat, lon
    return None, None
