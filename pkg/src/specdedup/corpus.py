"""Synthetic occurrence corpora with known ground-truth group structure.

The generator fabricates collectors with name-variant grammars, emits
duplicate sets of configurable size, and writes the ground truth beside
the corpus so detection quality can be scored exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .collectors import levenshtein
from .errors import ConfigError

CORPUS_COLUMNS = (
    "occurrenceID",
    "recordedBy",
    "recordNumber",
    "eventDate",
    "countryCode",
    "order",
    "family",
    "scientificName",
    "institutionCode",
    "typeStatus",
    "decimalLatitude",
    "decimalLongitude",
    "associatedMedia",
)

TRUTH_COLUMNS = ("record_id", "true_collector", "true_group")

_SYLLABLES = (
    "ba", "be", "bo", "ca", "ce", "co", "da", "del", "do", "fa", "fe",
    "ga", "go", "ha", "hu", "ka", "ke", "ko", "la", "le", "li", "lo",
    "ma", "me", "mi", "mo", "na", "ne", "no", "pa", "pe", "po", "ra",
    "re", "ri", "ro", "sa", "se", "si", "so", "ta", "te", "ti", "to",
    "va", "ve", "vi", "wa", "za", "zo",
)

_GIVEN_NAMES = (
    "Alba", "Bruno", "Carla", "Dora", "Elena", "Felix", "Greta", "Hugo",
    "Irene", "Jonas", "Karin", "Lars", "Mira", "Nils", "Olga", "Pavel",
    "Rosa", "Stefan", "Tilda", "Viktor",
)

_COUNTRIES = ("BR", "US", "AU", "CO", "CA", "ZA", "PE", "MX", "CN", "IN")
_ORDERS = ("Lamiales", "Solanales", "Fabales", "Poales", "Asterales", "Rosales")
_FAMILIES = {
    "Lamiales": ("Lamiaceae", "Verbenaceae"),
    "Solanales": ("Solanaceae", "Convolvulaceae"),
    "Fabales": ("Fabaceae", "Polygalaceae"),
    "Poales": ("Poaceae", "Cyperaceae"),
    "Asterales": ("Asteraceae", "Campanulaceae"),
    "Rosales": ("Rosaceae", "Urticaceae"),
}
_GENERA = ("Salvia", "Solanum", "Mimosa", "Poa", "Aster", "Rubus", "Carex", "Vicia")
_EPITHETS = (
    "alba", "gracilis", "montana", "parviflora", "robusta", "sylvatica",
    "tenuis", "vulgaris", "elegans", "minor",
)
_TYPE_TERMS = ("holotype", "isotype", "paratype", "syntype")


@dataclass
class CorpusConfig:
    """Knobs for the synthetic corpus generator; all randomness is seeded."""

    n_collectors: int
    events_per_collector: int
    size_dist: str = "uniform"  # "uniform" or "fixed"
    size_min: int = 1
    size_max: int = 6
    seed: int = 0
    institutions: int = 200
    georef_rate: float = 0.5
    typestatus_rate: float = 0.15
    image_rate: float = 0.4
    name_divergence_rate: float = 0.05
    field_divergence_rate: float = 0.0

    def validate(self) -> None:
        if self.n_collectors < 1 or self.events_per_collector < 1:
            raise ConfigError("n_collectors and events_per_collector must be >= 1")
        if self.size_dist not in ("uniform", "fixed"):
            raise ConfigError(f"unknown size distribution {self.size_dist!r}")
        if not 1 <= self.size_min <= self.size_max:
            raise ConfigError("need 1 <= size_min <= size_max")
        if self.institutions < self.size_max:
            raise ConfigError("institution pool smaller than the largest group size")


@dataclass
class GeneratedCorpus:
    rows: int
    groups: int
    collectors: int
    corpus_path: Path
    truth_path: Path


@dataclass
class _Collector:
    surname: str
    given: tuple[str, str]
    next_number: int = field(default=1)

    def variants(self, rng: random.Random) -> list[str]:
        i1, i2 = self.given[0][0], self.given[1][0]
        base = [
            f"{self.surname}, {i1}.{i2}.",
            f"{i1}. {i2}. {self.surname}",
            f"{self.given[0]} {i2}. {self.surname}",
            f"{self.given[0]} {self.given[1]} {self.surname}",
            f"{self.surname}, {self.given[0]} {i2}.",
        ]
        partner = f"{rng.choice('JKLM')}. {rng.choice(_GIVEN_NAMES)}"
        separator = rng.choice(("|", "; ", " & ", " and "))
        teams = [variant + separator + partner for variant in base[:2]]
        return base + teams


def _make_surname(rng: random.Random) -> str:
    length = rng.randint(3, 4)
    return "".join(rng.choice(_SYLLABLES) for _ in range(length)).capitalize()


def _distinct_surnames(rng: random.Random, count: int) -> list[str]:
    """Surnames kept mutually far apart so clustering cannot cross-merge.

    Rejects a candidate when an existing surname with the same first
    letter is within the clustering metric's edit-distance cutoff.
    """
    by_letter: dict[str, list[str]] = {}
    surnames: list[str] = []
    while len(surnames) < count:
        candidate = _make_surname(rng)
        folded = candidate.casefold()
        block = by_letter.setdefault(folded[0], [])
        close = False
        for existing in block:
            longest = max(len(existing), len(folded))
            limit = int(0.25 * longest)
            if abs(len(existing) - len(folded)) <= limit:
                if levenshtein(existing, folded, limit) <= limit:
                    close = True
                    break
        if not close:
            block.append(folded)
            surnames.append(candidate)
    return surnames


def _date_string(rng: random.Random, day: dt.date) -> str:
    style = rng.random()
    if style < 0.7:
        return day.isoformat()
    if style < 0.85:
        return day.strftime("%Y%m%d")
    return day.isoformat() + "T00:00:00"


def generate_corpus(
    corpus_path: str | Path, truth_path: str | Path, config: CorpusConfig
) -> GeneratedCorpus:
    """Write a corpus and its ground truth; byte-identical for a given seed."""
    config.validate()
    rng = random.Random(config.seed)
    surnames = _distinct_surnames(rng, config.n_collectors)
    collectors = [
        _Collector(surname=s, given=(rng.choice(_GIVEN_NAMES), rng.choice(_GIVEN_NAMES)))
        for s in surnames
    ]
    institution_pool = [f"H{i:04d}" for i in range(1, config.institutions + 1)]
    epoch = dt.date(1950, 1, 1)
    span_days = (dt.date(2020, 1, 1) - epoch).days

    rows = 0
    groups = 0
    corpus_path, truth_path = Path(corpus_path), Path(truth_path)
    with open(corpus_path, "w", encoding="utf-8", newline="") as corpus_handle, open(
        truth_path, "w", encoding="utf-8", newline=""
    ) as truth_handle:
        corpus = csv.writer(corpus_handle, delimiter="\t", lineterminator="\n")
        truth = csv.writer(truth_handle, delimiter="\t", lineterminator="\n")
        corpus.writerow(CORPUS_COLUMNS)
        truth.writerow(TRUTH_COLUMNS)
        for collector_index, collector in enumerate(collectors):
            variants = collector.variants(rng)
            for _ in range(config.events_per_collector):
                groups += 1
                size = (
                    config.size_min
                    if config.size_dist == "fixed"
                    else rng.randint(config.size_min, config.size_max)
                )
                number = collector.next_number
                collector.next_number += 1
                day = epoch + dt.timedelta(days=rng.randrange(span_days))
                country = rng.choice(_COUNTRIES)
                order = rng.choice(_ORDERS)
                family = rng.choice(_FAMILIES[order])
                name = f"{rng.choice(_GENERA)} {rng.choice(_EPITHETS)}"
                divergent_member = (
                    rng.randrange(size)
                    if size >= 2 and rng.random() < config.name_divergence_rate
                    else None
                )
                field_divergent_member = (
                    rng.randrange(size)
                    if size >= 2 and rng.random() < config.field_divergence_rate
                    else None
                )
                institutions = rng.sample(institution_pool, size)
                for member in range(size):
                    rows += 1
                    record_id = f"S{rows:08d}"
                    number_text = str(number)
                    decoration = rng.random()
                    if decoration < 0.15:
                        number_text = f"{collector.surname} {number_text}"
                    elif decoration < 0.25:
                        number_text = f"{collector.surname[:1]}{collector.given[0][0]}-{number_text}"
                    member_name = name
                    if member == divergent_member:
                        member_name = f"{rng.choice(_GENERA)} {rng.choice(_EPITHETS)}"
                    member_family = family
                    if member == field_divergent_member:
                        member_family = rng.choice(_FAMILIES[order])
                    georef = rng.random() < config.georef_rate
                    latitude = f"{rng.uniform(-60, 70):.5f}" if georef else ""
                    longitude = f"{rng.uniform(-180, 180):.5f}" if georef else ""
                    corpus.writerow(
                        [
                            record_id,
                            rng.choice(variants),
                            number_text,
                            _date_string(rng, day),
                            country,
                            order,
                            member_family,
                            member_name,
                            institutions[member],
                            rng.choice(_TYPE_TERMS)
                            if rng.random() < config.typestatus_rate
                            else "",
                            latitude,
                            longitude,
                            f"https://img.example/{record_id}"
                            if rng.random() < config.image_rate
                            else "",
                        ]
                    )
                    truth.writerow([record_id, str(collector_index + 1), str(groups)])
    return GeneratedCorpus(
        rows=rows,
        groups=groups,
        collectors=len(collectors),
        corpus_path=corpus_path,
        truth_path=truth_path,
    )


@dataclass
class ScoreResult:
    truth_groups: int
    detected_groups: int
    exactly_recovered: int

    @property
    def recovery_rate(self) -> float:
        return self.exactly_recovered / self.truth_groups if self.truth_groups else 1.0

    def to_json_dict(self) -> dict[str, object]:
        return {
            "truth_groups": self.truth_groups,
            "detected_groups": self.detected_groups,
            "exactly_recovered": self.exactly_recovered,
            "recovery_rate": self.recovery_rate,
        }


def read_truth(path: str | Path) -> dict[str, str]:
    """record_id -> true group identifier."""
    truth: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != TRUTH_COLUMNS:
            raise ConfigError(f"{path}: not a ground truth file")
        for row in reader:
            if row:
                truth[row[0]] = row[2]
    return truth


def score_groups(
    detected: Mapping[str, object], truth: Mapping[str, str]
) -> ScoreResult:
    """Fraction of ground-truth groups recovered with exactly equal members."""

    def partition(assignment: Iterable[tuple[str, object]]) -> set[frozenset[str]]:
        groups: dict[object, set[str]] = {}
        for record_id, label in assignment:
            groups.setdefault(label, set()).add(record_id)
        return {frozenset(members) for members in groups.values()}

    truth_sets = partition(truth.items())
    detected_sets = partition(detected.items())
    return ScoreResult(
        truth_groups=len(truth_sets),
        detected_groups=len(detected_sets),
        exactly_recovered=len(truth_sets & detected_sets),
    )
