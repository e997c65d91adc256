"""Group labelled specimens into duplicate groups.

The grouping key is (collector_id, event date, normalized record number);
record numbers are compared exactly after prefix stripping and case
folding. Groups of size >= 2 are duplicate relationships.
"""

from __future__ import annotations

import csv
import datetime as dt
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .collectors import LabelledRecord
from .errors import ConfigError
from .records import SpecimenRecord, record_from_row, record_to_row


@dataclass(frozen=True, slots=True)
class GroupKey:
    collector_id: int
    event_date: dt.date
    record_number: str


@dataclass(slots=True)
class DuplicateGroup:
    duplicate_group_id: int
    key: GroupKey
    member_record_ids: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.member_record_ids)


@dataclass(frozen=True, slots=True)
class GroupedRecord:
    record: SpecimenRecord
    collector_id: int
    duplicate_group_id: int


def normalize_record_number(raw: str) -> str:
    """Strip the leading alphabetic prefix from a collector record number.

    Removes the maximal leading run of letters, whitespace, periods,
    hyphens and apostrophes before the first digit ("Hutchison 5738" ->
    "5738"); everything from the first digit onward survives, so suffixes
    like "26185A" are preserved. Trailing whitespace is trimmed.
    """
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch.isdigit() or not (ch.isalpha() or ch.isspace() or ch in ".-'"):
            break
        i += 1
    return raw[i:].rstrip()


def group_key(collector_id: int, record: SpecimenRecord) -> GroupKey:
    """Build the grouping key; requires an eligible (day-precise) record."""
    if record.event_date is None:
        raise ConfigError(f"record {record.record_id} has no day-precise date")
    return GroupKey(
        collector_id=collector_id,
        event_date=record.event_date,
        record_number=normalize_record_number(record.record_number_raw).casefold(),
    )


def detect_duplicate_groups(
    labelled: Iterable[LabelledRecord],
    partitions: int = 1,
    tmp_dir: str | None = None,
) -> tuple[list[GroupedRecord], list[DuplicateGroup]]:
    """Partition labelled records into duplicate groups.

    Group ids are dense and deterministic: groups sorted by
    (collector_id, event_date, record_number), numbered from 1. With
    partitions > 1 records are hash-partitioned to temporary spill files
    and grouped one partition at a time, bounding memory by the largest
    partition instead of the whole corpus.
    """
    if partitions < 1:
        raise ConfigError(f"partitions must be >= 1, got {partitions}")
    if partitions == 1:
        buckets: dict[GroupKey, list[LabelledRecord]] = {}
        for item in labelled:
            buckets.setdefault(group_key(item.collector_id, item.record), []).append(item)
        return _emit(buckets, _assign_ids(buckets.keys()))
    return _detect_partitioned(labelled, partitions, tmp_dir)


def _assign_ids(keys: Iterable[GroupKey]) -> dict[GroupKey, int]:
    ordered = sorted(keys, key=lambda k: (k.collector_id, k.event_date, k.record_number))
    return {key: i for i, key in enumerate(ordered, start=1)}


def _emit(
    buckets: dict[GroupKey, list[LabelledRecord]], ids: dict[GroupKey, int]
) -> tuple[list[GroupedRecord], list[DuplicateGroup]]:
    grouped: list[GroupedRecord] = []
    groups: list[DuplicateGroup] = []
    for key in sorted(buckets, key=ids.get):
        gid = ids[key]
        group = DuplicateGroup(duplicate_group_id=gid, key=key)
        for item in buckets[key]:
            group.member_record_ids.append(item.record.record_id)
            grouped.append(
                GroupedRecord(
                    record=item.record,
                    collector_id=item.collector_id,
                    duplicate_group_id=gid,
                )
            )
        groups.append(group)
    return grouped, groups


def _detect_partitioned(
    labelled: Iterable[LabelledRecord], partitions: int, tmp_dir: str | None
) -> tuple[list[GroupedRecord], list[DuplicateGroup]]:
    keys: set[GroupKey] = set()
    with tempfile.TemporaryDirectory(dir=tmp_dir, prefix="specdedup-spill-") as spill:
        paths = [os.path.join(spill, f"part-{i:04d}.tsv") for i in range(partitions)]
        writers = []
        handles = []
        for path in paths:
            handle = open(path, "w", encoding="utf-8", newline="")
            handles.append(handle)
            writers.append(csv.writer(handle, delimiter="\t", lineterminator="\n"))
        try:
            for item in labelled:
                key = group_key(item.collector_id, item.record)
                keys.add(key)
                part = _partition_of(key, partitions)
                writers[part].writerow(
                    record_to_row(item.record) + [str(item.collector_id)]
                )
        finally:
            for handle in handles:
                handle.close()

        ids = _assign_ids(keys)
        del keys
        grouped_all: list[GroupedRecord] = []
        groups_all: list[DuplicateGroup] = []
        for path in paths:
            buckets: dict[GroupKey, list[LabelledRecord]] = {}
            with open(path, encoding="utf-8", newline="") as handle:
                for row in csv.reader(handle, delimiter="\t"):
                    record = record_from_row(row)
                    item = LabelledRecord(record=record, collector_id=int(row[-1]))
                    buckets.setdefault(group_key(item.collector_id, record), []).append(item)
            grouped, groups = _emit(buckets, ids)
            grouped_all.extend(grouped)
            groups_all.extend(groups)
    groups_all.sort(key=lambda g: g.duplicate_group_id)
    return grouped_all, groups_all


def _partition_of(key: GroupKey, partitions: int) -> int:
    # Stable across runs (no PYTHONHASHSEED dependence).
    digest = 0
    for ch in f"{key.collector_id}\x1f{key.event_date.isoformat()}\x1f{key.record_number}":
        digest = (digest * 1000003 + ord(ch)) & 0xFFFFFFFF
    return digest % partitions


def group_size_histogram(groups: Iterable[DuplicateGroup]) -> dict[int, int]:
    """Map group size -> number of groups of that size."""
    return dict(sorted(Counter(group.size for group in groups).items()))


def duplicate_relationship_counts(groups: Iterable[DuplicateGroup]) -> tuple[int, int]:
    """(groups of size >= 2, records participating in those groups)."""
    n_groups = 0
    n_records = 0
    for group in groups:
        if group.size >= 2:
            n_groups += 1
            n_records += group.size
    return n_groups, n_records
