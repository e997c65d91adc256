"""Resolve free-text collector strings to numeric collector identifiers.

Primary-collector extraction, name atomization into (surname, initials),
a bounded string metric over parsed names, and density-based clustering
(DBSCAN) within surname-first-letter blocks.
"""

from __future__ import annotations

import re
from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import ConfigError
from .ingest import is_eligible
from .records import SpecimenRecord

# Surname edit distances above this fraction mean "different person".
SURNAME_CUTOFF = 0.25

DEFAULT_EPS = 0.2
DEFAULT_MIN_PTS = 1

# Team separators tried in priority order; the first hit splits the string.
_TEAM_SEPARATORS = (
    ("|", False),
    (";", False),
    ("&", False),
    (r"\s+and\s+", True),
    (r"\s+with\s+", True),
    (r"\s+et\s+", True),
)


@dataclass(frozen=True, slots=True)
class ParsedName:
    """A collector name atomized into surname and given-name initials."""

    surname: str
    initials: tuple[str, ...]
    raw: str


@dataclass(frozen=True, slots=True)
class CollectorEntity:
    """A cluster of recorded_by variants with a stable numeric identifier."""

    collector_id: int
    members: frozenset[str]
    canonical_surname: str
    unresolved: bool = False


@dataclass(frozen=True, slots=True)
class LabelledRecord:
    record: SpecimenRecord
    collector_id: int


def extract_primary(recorded_by: str) -> str:
    """Return the first collector token of a (possibly team) string."""
    for separator, is_regex in _TEAM_SEPARATORS:
        if is_regex:
            m = re.search(separator, recorded_by)
            if m:
                return recorded_by[: m.start()].strip()
        elif separator in recorded_by:
            return recorded_by.split(separator, 1)[0].strip()
    return recorded_by.strip()


def parse_name(primary: str) -> ParsedName | None:
    """Atomize one collector name; None when no alphabetic surname exists.

    Handles both "Surname, Initials" ("Zika, P.F.") and "Given(s) Surname"
    ("Peter F. Zika", "P. F. Zika") written forms.
    """
    text = primary.strip()
    if not text:
        return None
    if "," in text:
        surname_part, _, given_part = text.partition(",")
        surname = _clean_surname(surname_part)
    else:
        tokens = text.split()
        alpha = [i for i, t in enumerate(tokens) if _clean_surname(t)]
        if not alpha:
            return None
        surname = _clean_surname(tokens[alpha[-1]])
        given_part = " ".join(tokens[: alpha[-1]])
    if not surname:
        return None
    return ParsedName(surname=surname, initials=_initials(given_part), raw=primary)


def parse_recorded_by(recorded_by: str) -> ParsedName | None:
    """Parse the primary collector of a full recorded_by string.

    The returned name keeps the full original string as its raw form so
    entity members remain the verbatim recorded_by variants.
    """
    parsed = parse_name(extract_primary(recorded_by))
    if parsed is None:
        return None
    return ParsedName(surname=parsed.surname, initials=parsed.initials, raw=recorded_by)


def _clean_surname(token: str) -> str:
    kept = "".join(ch for ch in token if ch.isalpha() or ch in "-' ")
    kept = " ".join(kept.split()).strip("-' ")
    return kept.casefold() if any(ch.isalpha() for ch in kept) else ""


def _initials(given_part: str) -> tuple[str, ...]:
    initials: list[str] = []
    for token in given_part.split():
        pieces = token.split(".") if "." in token else [token]
        for piece in pieces:
            letters = [ch for ch in piece if ch.isalpha()]
            if not letters:
                continue
            initials.append(letters[0].casefold())
    return tuple(initials)


def levenshtein(a: str, b: str, limit: int | None = None) -> int:
    """Edit distance; values above ``limit`` are reported as limit + 1."""
    if a == b:
        return 0
    if limit is not None and abs(len(a) - len(b)) > limit:
        return limit + 1
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        if limit is not None and min(current) > limit:
            return limit + 1
        previous = current
    return previous[-1]


def _initials_compatible(a: tuple[str, ...], b: tuple[str, ...]) -> bool:
    return all(x == y for x, y in zip(a, b))


def _surname_distance(sa: str, sb: str) -> float:
    if sa == sb:
        return 0.0
    # Different first letters always mean a different person; this keeps
    # surname-first-letter blocking exact rather than approximate.
    if sa[:1] != sb[:1]:
        return 1.0
    longest = max(len(sa), len(sb))
    limit = int(SURNAME_CUTOFF * longest)
    distance = levenshtein(sa, sb, limit)
    normalized = distance / longest
    return normalized if normalized <= SURNAME_CUTOFF else 1.0


def name_distance(a: ParsedName, b: ParsedName) -> float:
    """Distance in [0, 1] between two parsed names.

    0 when surnames are equal and initials are compatible (equal, or one
    sequence a prefix of the other); 1 when initials conflict at a shared
    position or surnames are clearly different; otherwise the normalized
    surname edit distance (bounded by the 0.25 cutoff).
    """
    if not _initials_compatible(a.initials, b.initials):
        return 1.0
    return _surname_distance(a.surname, b.surname)


def _sort_key(name: ParsedName) -> tuple[str, tuple[str, ...], str]:
    return (name.surname, name.initials, name.raw)


def _dbscan_block(
    names: list[ParsedName], eps: float, min_pts: int
) -> tuple[list[list[ParsedName]], list[ParsedName]]:
    """Standard DBSCAN over one block; returns (clusters, noise)."""
    by_surname: dict[str, list[int]] = {}
    for i, name in enumerate(names):
        by_surname.setdefault(name.surname, []).append(i)
    surnames = sorted(by_surname)
    # Surname pairs within reach of eps; name-level checks add initials.
    near: dict[str, list[str]] = {s: [s] for s in surnames}
    if eps < 1.0:
        for i, sa in enumerate(surnames):
            for sb in surnames[i + 1 :]:
                if _surname_distance(sa, sb) <= eps:
                    near[sa].append(sb)
                    near[sb].append(sa)

    def neighbors(idx: int) -> list[int]:
        name = names[idx]
        if eps >= 1.0:
            # Every distance is <= 1, so the whole block is one neighborhood.
            return list(range(len(names)))
        found = []
        for surname in near[name.surname]:
            for j in by_surname[surname]:
                if _initials_compatible(name.initials, names[j].initials):
                    found.append(j)
        return found

    unvisited = -2
    noise_label = -1
    labels = [unvisited] * len(names)
    clusters: list[list[ParsedName]] = []
    for idx in range(len(names)):
        if labels[idx] != unvisited:
            continue
        seed_neighbors = neighbors(idx)
        if len(seed_neighbors) < min_pts:
            labels[idx] = noise_label
            continue
        cluster_id = len(clusters)
        clusters.append([])
        labels[idx] = cluster_id
        queue = deque(seed_neighbors)
        while queue:
            j = queue.popleft()
            if labels[j] == noise_label:
                labels[j] = cluster_id
            if labels[j] != unvisited:
                continue
            labels[j] = cluster_id
            expansion = neighbors(j)
            if len(expansion) >= min_pts:
                queue.extend(expansion)
    for i, label in enumerate(labels):
        if label >= 0:
            clusters[label].append(names[i])
    noise = [names[i] for i, label in enumerate(labels) if label == noise_label]
    return [c for c in clusters if c], noise


def _blocks(names: list[ParsedName], eps: float) -> Iterator[list[ParsedName]]:
    # Blocking is purely an efficiency device; with eps >= 1 every pair is
    # within reach so the whole input is a single block.
    if eps >= 1.0:
        if names:
            yield names
        return
    grouped: dict[str, list[ParsedName]] = {}
    for name in names:
        grouped.setdefault(name.surname[:1], []).append(name)
    for letter in sorted(grouped):
        yield grouped[letter]


def cluster_collectors(
    names: Iterable[ParsedName | str],
    eps: float = DEFAULT_EPS,
    min_pts: int = DEFAULT_MIN_PTS,
) -> list[CollectorEntity]:
    """Cluster collector names into entities with dense, deterministic ids.

    Accepts parsed names or raw recorded_by strings (parsed via
    parse_recorded_by; unparseable strings become singleton unresolved
    entities). With min_pts > 1, DBSCAN noise names also become singleton
    unresolved entities so downstream grouping still functions.
    """
    if not 0.0 < eps <= 1.0:
        raise ConfigError(f"eps must be in (0, 1], got {eps}")
    if min_pts < 1:
        raise ConfigError(f"min_pts must be >= 1, got {min_pts}")
    parsed: list[ParsedName] = []
    unparseable: list[str] = []
    seen: set[ParsedName] = set()
    seen_raw: set[str] = set()
    for item in names:
        if isinstance(item, str):
            name = parse_recorded_by(item)
            if name is None:
                if item not in seen_raw:
                    seen_raw.add(item)
                    unparseable.append(item)
                continue
        else:
            name = item
        if name not in seen:
            seen.add(name)
            parsed.append(name)
    parsed.sort(key=_sort_key)

    drafts: list[tuple[set[str], str, bool]] = []
    for block in _blocks(parsed, eps):
        clusters, noise = _dbscan_block(block, eps, min_pts)
        for cluster in clusters:
            drafts.append((
                {n.raw for n in cluster},
                _canonical_surname(cluster),
                False,
            ))
        for name in noise:
            drafts.append(({name.raw}, name.surname, True))
    for raw in unparseable:
        drafts.append(({raw}, raw.strip().casefold(), True))
    return _number_entities(drafts)


def _canonical_surname(cluster: Sequence[ParsedName]) -> str:
    counts = Counter(name.surname for name in cluster)
    top_count = max(counts.values())
    # Most frequent surname wins; ties resolve lexicographically.
    return min(s for s, c in counts.items() if c == top_count)


def _number_entities(drafts: list[tuple[set[str], str, bool]]) -> list[CollectorEntity]:
    drafts.sort(key=lambda d: (d[1], min(d[0])))
    return [
        CollectorEntity(
            collector_id=i,
            members=frozenset(members),
            canonical_surname=surname,
            unresolved=unresolved,
        )
        for i, (members, surname, unresolved) in enumerate(drafts, start=1)
    ]


def member_index(entities: Iterable[CollectorEntity]) -> dict[str, int]:
    """Map every member recorded_by string to its collector_id."""
    index: dict[str, int] = {}
    for entity in entities:
        for member in entity.members:
            index[member] = entity.collector_id
    return index


@dataclass
class LabelStats:
    labelled: int = 0
    excluded: int = 0


def assign_collector_ids(
    records: Iterable[SpecimenRecord],
    entities: Iterable[CollectorEntity],
    stats: LabelStats | None = None,
) -> Iterator[LabelledRecord]:
    """Label eligible records with their collector_id.

    Ineligible records are excluded from the labelled stream and counted.
    Every eligible record's recorded_by string must belong to some entity
    (guaranteed when the entities were clustered from the same stream).
    """
    if stats is None:
        stats = LabelStats()
    index = member_index(entities)
    for record in records:
        if not is_eligible(record):
            stats.excluded += 1
            continue
        collector_id = index.get(record.recorded_by)
        if collector_id is None:
            raise ConfigError(
                f"record {record.record_id}: recorded_by not covered by entities"
            )
        stats.labelled += 1
        yield LabelledRecord(record=record, collector_id=collector_id)


def resolve_collectors(
    records: Iterable[SpecimenRecord],
    eps: float = DEFAULT_EPS,
    min_pts: int = DEFAULT_MIN_PTS,
) -> list[CollectorEntity]:
    """Cluster the distinct recorded_by strings of the eligible records."""
    distinct: dict[str, None] = {}
    for record in records:
        if is_eligible(record):
            distinct.setdefault(record.recorded_by)
    return cluster_collectors(distinct, eps=eps, min_pts=min_pts)


def entity_table_rows(entities: Iterable[CollectorEntity]) -> Iterator[list[str]]:
    """Rows for the delimited entity table export."""
    for entity in entities:
        members = sorted(entity.members)
        yield [
            str(entity.collector_id),
            entity.canonical_surname,
            str(len(members)),
            "|".join(members),
        ]
