"""Tab-delimited checkpoint files exchanged between pipeline stages.

Every checkpoint carries the canonical record columns first, then any
stage-specific extra columns (collector_id, duplicate_group_id, flags).
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import PipelineError
from .records import CANONICAL_COLUMNS, SpecimenRecord, record_from_row, record_to_row


def write_checkpoint(
    path: str | Path,
    rows: Iterable[tuple[SpecimenRecord, Sequence[str]]],
    extra_columns: Sequence[str] = (),
) -> int:
    """Write records plus extra columns; returns the row count."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(list(CANONICAL_COLUMNS) + list(extra_columns))
        for record, extras in rows:
            writer.writerow(record_to_row(record) + list(extras))
            count += 1
    return count


def read_checkpoint(
    path: str | Path, expect_extras: Sequence[str] = ()
) -> Iterator[tuple[SpecimenRecord, list[str]]]:
    """Stream (record, extra values) pairs from a checkpoint file."""
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle, delimiter="\t")
        header = next(reader, None)
        if header is None:
            return
        if tuple(header[: len(CANONICAL_COLUMNS)]) != CANONICAL_COLUMNS:
            raise PipelineError(f"{path}: not a canonical checkpoint file")
        extras_present = header[len(CANONICAL_COLUMNS) :]
        for column in expect_extras:
            if column not in extras_present:
                raise PipelineError(f"{path}: checkpoint lacks column {column!r}")
        positions = [
            len(CANONICAL_COLUMNS) + extras_present.index(c) for c in expect_extras
        ]
        for row in reader:
            if not row:
                continue
            yield record_from_row(row), [row[i] for i in positions]
