"""Full pipeline orchestration: ingest through graph export.

Stages run sequentially, each consuming the previous stage's output;
checkpoint files make every intermediate inspectable and let any stage
be re-run on its own through the CLI.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import assess as assess_mod
from . import dedup as dedup_mod
from .assess import FlagCellCounts, GroupAssessment
from .checkpoints import write_checkpoint
from .collectors import (
    CollectorEntity,
    LabelStats,
    assign_collector_ids,
    entity_table_rows,
    resolve_collectors,
)
from .dedup import DuplicateGroup, GroupedRecord, group_size_histogram
from .errors import ConfigError, PipelineError
from .graph import InstitutionGraph, LouvainResult, build_graph, export_graph, louvain_communities
from .ingest import (
    ColumnMapping,
    ParseStats,
    ensure_unique_ids,
    is_eligible,
    parse_source,
)
from .propagate import (
    ANNOTATION_CLASSES,
    DEFAULT_TYPE_VOCABULARY,
    GroupPropagation,
    compute_annotation_flags,
    find_propagable,
    summarize,
)
from .records import SpecimenRecord

REPORT_VERSION = 1

GRAPH_EXPORT_FILES = {
    "graphml": "graph.graphml",
    "dot": "graph.dot",
    "edgelist-csv": "graph_edges.csv",
}


@dataclass
class PipelineConfig:
    inputs: Sequence[str | Path]
    out_dir: str | Path
    mapping: ColumnMapping | None = None
    eps: float = 0.2
    min_pts: int = 1
    strict_missing: bool = False
    type_vocabulary: Sequence[str] = DEFAULT_TYPE_VOCABULARY
    partitions: int = 1
    seed: int = 0
    resolution: float = 1.0
    graph_formats: Sequence[str] = ("graphml", "dot", "edgelist-csv")
    checkpoints: bool = True
    figures: bool = True

    def validate(self) -> None:
        if not self.inputs:
            raise ConfigError("no input files given")
        if not 0.0 < self.eps <= 1.0:
            raise ConfigError(f"eps must be in (0, 1], got {self.eps}")
        if self.min_pts < 1:
            raise ConfigError(f"min_pts must be >= 1, got {self.min_pts}")
        if self.partitions < 1:
            raise ConfigError(f"partitions must be >= 1, got {self.partitions}")
        if self.resolution <= 0:
            raise ConfigError(f"resolution must be > 0, got {self.resolution}")
        unknown = set(self.graph_formats) - set(GRAPH_EXPORT_FILES)
        if unknown:
            raise ConfigError(f"unknown graph formats: {sorted(unknown)}")


@dataclass
class RunReport:
    """Stage-by-stage accounting for one pipeline run."""

    config: dict = field(default_factory=dict)
    timings_seconds: dict = field(default_factory=dict)
    ingest: dict = field(default_factory=dict)
    eligibility: dict = field(default_factory=dict)
    collectors: dict = field(default_factory=dict)
    dedup: dict = field(default_factory=dict)
    assessment: dict = field(default_factory=dict)
    propagation: dict = field(default_factory=dict)
    graph: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "config": self.config,
            "timings_seconds": self.timings_seconds,
            "ingest": self.ingest,
            "eligibility": self.eligibility,
            "collectors": self.collectors,
            "dedup": self.dedup,
            "assessment": self.assessment,
            "propagation": self.propagation,
            "graph": self.graph,
        }

    def to_text(self) -> str:
        lines = ["specdedup run report", "====================", ""]
        lines.append(
            f"rows read {self.ingest['rows_read']}, skipped {self.ingest['rows_skipped']}, "
            f"records {self.ingest['records']}"
        )
        lines.append(
            f"eligible {self.eligibility['eligible']}, "
            f"ineligible {self.eligibility['ineligible']}"
        )
        lines.append(
            f"labelled {self.collectors['labelled_records']} records over "
            f"{self.collectors['entities']} collector entities "
            f"({self.collectors['unresolved_entities']} unresolved)"
        )
        lines.append(
            f"duplicate groups {self.dedup['groups']}; records in duplicate "
            f"relationships (size >= 2) {self.dedup['duplicate_relationship_records']} "
            f"in {self.dedup['groups_min2']} groups"
        )
        lines.append(
            f"conservative: {self.assessment['conservative_records']} records in "
            f"{self.assessment['conservative_groups']} groups"
        )
        for annotation_class in ANNOTATION_CLASSES:
            stats = self.propagation[annotation_class]
            lines.append(
                f"{annotation_class}: {stats['specimens_receivable']} specimens could "
                f"receive the annotation in {stats['groups_propagable']} groups"
            )
        divergence = self.propagation["name_divergence"]
        lines.append(
            f"name divergence: {divergence['specimens_in_divergent_groups']} specimens in "
            f"{divergence['groups_divergent']} groups with multiple names"
        )
        lines.append(
            f"graph: {self.graph['nodes']} institutions, {self.graph['edges']} edges, "
            f"{self.graph['communities']} communities "
            f"(modularity {self.graph['modularity']}, "
            f"{self.graph['isolated_nodes']} isolated)"
        )
        lines.append("")
        lines.append("stage timings (s): " + ", ".join(
            f"{stage}={seconds:.3f}" for stage, seconds in self.timings_seconds.items()
        ))
        return "\n".join(lines) + "\n"

    def cross_check(self) -> None:
        """Verify that stage counts agree with each other; raises on mismatch."""
        checks = [
            (
                "ingest rows",
                self.ingest["rows_read"],
                self.ingest["rows_skipped"] + self.ingest["records"],
            ),
            (
                "eligibility split",
                self.ingest["records"],
                self.eligibility["eligible"] + self.eligibility["ineligible"],
            ),
            (
                "labelling",
                self.eligibility["eligible"],
                self.collectors["labelled_records"],
            ),
            (
                "grouping partition",
                self.collectors["labelled_records"],
                self.dedup["records_in_groups"],
            ),
            (
                "assessment cells",
                self.dedup["groups"],
                sum(c["group_count"] for c in self.assessment["flag_cells"]),
            ),
            (
                "assessment cell records",
                self.dedup["records_in_groups"],
                sum(c["record_count"] for c in self.assessment["flag_cells"]),
            ),
        ]
        for name, left, right in checks:
            if left != right:
                raise PipelineError(f"cross-check failed for {name}: {left} != {right}")


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute all stages, write artifacts, and return the run report."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = RunReport()
    report.config = {
        "inputs": [str(p) for p in config.inputs],
        "eps": config.eps,
        "min_pts": config.min_pts,
        "strict_missing": config.strict_missing,
        "partitions": config.partitions,
        "seed": config.seed,
        "resolution": config.resolution,
        "graph_formats": list(config.graph_formats),
        "checkpoints": config.checkpoints,
        "figures": config.figures,
    }
    timer = _StageTimer(report.timings_seconds)

    with timer.stage("ingest"):
        records, parse_stats, collisions = _ingest(config)
        report.ingest = {
            "rows_read": parse_stats.rows_read,
            "rows_skipped": parse_stats.rows_skipped,
            "records": len(records),
            "record_id_collisions": collisions,
        }
        if config.checkpoints:
            write_checkpoint(out_dir / "canonical.tsv", ((r, ()) for r in records))

    with timer.stage("collectors"):
        eligible = sum(1 for r in records if is_eligible(r))
        report.eligibility = {
            "eligible": eligible,
            "ineligible": len(records) - eligible,
        }
        entities = resolve_collectors(records, eps=config.eps, min_pts=config.min_pts)
        label_stats = LabelStats()
        labelled = list(assign_collector_ids(records, entities, label_stats))
        del records
        report.collectors = {
            "labelled_records": label_stats.labelled,
            "excluded_records": label_stats.excluded,
            "distinct_names": sum(len(e.members) for e in entities),
            "entities": len(entities),
            "unresolved_entities": sum(1 for e in entities if e.unresolved),
        }
        _write_entities(out_dir / "entities.tsv", entities)
        if config.checkpoints:
            write_checkpoint(
                out_dir / "labelled.tsv",
                ((item.record, (str(item.collector_id),)) for item in labelled),
                extra_columns=("collector_id",),
            )

    with timer.stage("dedup"):
        grouped, groups = dedup_mod.detect_duplicate_groups(
            labelled, partitions=config.partitions
        )
        del labelled
        n_min2, n_dup_records = dedup_mod.duplicate_relationship_counts(groups)
        sizes = group_size_histogram(groups)
        report.dedup = {
            "groups": len(groups),
            "groups_min2": n_min2,
            "duplicate_relationship_records": n_dup_records,
            "records_in_groups": sum(g.size for g in groups),
            "max_group_size": max(sizes) if sizes else 0,
            "size_histogram": {str(k): v for k, v in sizes.items()},
        }
        if config.checkpoints:
            write_checkpoint(
                out_dir / "grouped.tsv",
                (
                    (item.record, (str(item.collector_id), str(item.duplicate_group_id)))
                    for item in grouped
                ),
                extra_columns=("collector_id", "duplicate_group_id"),
            )

    with timer.stage("assess"):
        members = _members_by_group(grouped)
        assessments = {
            gid: assess_mod.assess_group(
                member_records, gid, strict_missing=config.strict_missing
            )
            for gid, member_records in members.items()
        }
        conservative_groups, cells = assess_mod.conservative_filter(groups, assessments)
        conservative_records = sum(g.size for g in conservative_groups)
        report.assessment = {
            "conservative_groups": len(conservative_groups),
            "conservative_records": conservative_records,
            "flag_cells": cells.to_json_dict(),
        }
        _write_flag_cells(out_dir, cells)
        if config.checkpoints:
            write_checkpoint(
                out_dir / "assessed.tsv",
                (
                    (
                        item.record,
                        (
                            str(item.collector_id),
                            str(item.duplicate_group_id),
                            *_bools(assessments[item.duplicate_group_id].cell),
                            _bool(assessments[item.duplicate_group_id].conservative),
                        ),
                    )
                    for item in grouped
                ),
                extra_columns=(
                    "collector_id",
                    "duplicate_group_id",
                    "countrycode_conservative",
                    "order_conservative",
                    "family_conservative",
                    "conservative",
                ),
            )

    with timer.stage("propagate"):
        propagations = {
            gid: find_propagable(
                member_records, gid, vocabulary=tuple(config.type_vocabulary)
            )
            for gid, member_records in members.items()
        }
        conservative_ids = {g.duplicate_group_id for g in conservative_groups}
        summary = summarize(
            propagations[gid] for gid in sorted(conservative_ids)
        )
        report.propagation = summary.to_json_dict()
        _write_group_report(out_dir / "groups.tsv", groups, assessments, propagations)
        write_propagation_records(
            out_dir / "propagation_records.tsv",
            ((item.record, item.duplicate_group_id) for item in grouped),
            propagations,
            tuple(config.type_vocabulary),
        )
        (out_dir / "propagation_summary.json").write_text(
            json.dumps(summary.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )

    with timer.stage("graph"):
        graph = build_graph(
            [r.institution_code for r in members[g.duplicate_group_id]]
            for g in conservative_groups
        )
        louvain: LouvainResult | None = None
        if graph.n_nodes:
            louvain = louvain_communities(
                graph, seed=config.seed, resolution=config.resolution
            )
            graph.communities = louvain.communities
            graph.modularity = louvain.modularity
        report.graph = {
            "nodes": graph.n_nodes,
            "edges": graph.n_edges,
            "isolated_nodes": len(graph.isolated_nodes()),
            "communities": louvain.community_count if louvain else 0,
            "modularity": louvain.modularity if louvain else None,
        }
        for fmt in config.graph_formats:
            export_graph(graph, out_dir / GRAPH_EXPORT_FILES[fmt], fmt)
        _write_graph_nodes(out_dir / "graph_nodes.tsv", graph)

    if config.figures:
        with timer.stage("figures"):
            from .reporting import render_figures

            render_figures(out_dir, cells, sizes)

    report.timings_seconds["total"] = round(
        sum(report.timings_seconds.values()), 6
    )
    report.cross_check()
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    return report


class _StageTimer:
    def __init__(self, sink: dict) -> None:
        self._sink = sink

    def stage(self, name: str):
        return _StageContext(self._sink, name)


class _StageContext:
    def __init__(self, sink: dict, name: str) -> None:
        self._sink = sink
        self._name = name

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self._sink[self._name] = round(time.perf_counter() - self._start, 6)
        if exc is not None and not isinstance(exc, PipelineError) and exc_type not in (
            ConfigError,
        ):
            raise PipelineError(f"stage {self._name!r} failed: {exc}") from exc
        return False


def _ingest(config: PipelineConfig) -> tuple[list[SpecimenRecord], ParseStats, int]:
    stats = ParseStats()
    records = list(
        ensure_unique_ids(
            (
                record
                for path in config.inputs
                for record in parse_source(path, config.mapping, stats)
            ),
            stats,
        )
    )
    return records, stats, stats.id_collisions


def _members_by_group(grouped: Iterable[GroupedRecord]) -> dict[int, list[SpecimenRecord]]:
    members: dict[int, list[SpecimenRecord]] = {}
    for item in grouped:
        members.setdefault(item.duplicate_group_id, []).append(item.record)
    return members


def _bool(value: bool) -> str:
    return "true" if value else "false"


def _bools(values: Iterable[bool]) -> tuple[str, ...]:
    return tuple(_bool(v) for v in values)


def _write_entities(path: Path, entities: Iterable[CollectorEntity]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["collector_id", "canonical_surname", "member_count", "members"])
        writer.writerows(entity_table_rows(entities))


def _write_flag_cells(out_dir: Path, cells: FlagCellCounts) -> None:
    with open(out_dir / "flag_combinations.tsv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(
            [
                "countrycode_conservative",
                "order_conservative",
                "family_conservative",
                "group_count",
                "record_count",
            ]
        )
        writer.writerows(cells.rows())
    (out_dir / "flag_combinations.json").write_text(
        json.dumps(cells.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )


def _write_group_report(
    path: Path,
    groups: Iterable[DuplicateGroup],
    assessments: dict[int, GroupAssessment],
    propagations: dict[int, GroupPropagation],
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        header = [
            "duplicate_group_id",
            "collector_id",
            "event_date",
            "record_number",
            "size",
            "conservative",
        ]
        for annotation_class in ANNOTATION_CLASSES:
            header += [
                f"{annotation_class}_any",
                f"{annotation_class}_all",
                f"{annotation_class}_propagable",
                f"{annotation_class}_with",
                f"{annotation_class}_without",
            ]
        header.append("name_divergent")
        writer.writerow(header)
        for group in groups:
            gid = group.duplicate_group_id
            propagation = propagations[gid]
            row = [
                str(gid),
                str(group.key.collector_id),
                group.key.event_date.isoformat(),
                group.key.record_number,
                str(group.size),
                _bool(assessments[gid].conservative),
            ]
            for annotation_class in ANNOTATION_CLASSES:
                state = propagation.for_class(annotation_class)
                row += [
                    _bool(state.any_set),
                    _bool(state.all_set),
                    _bool(state.propagable),
                    str(state.count_with),
                    str(state.count_without),
                ]
            row.append(_bool(propagation.name_divergent))
            writer.writerow(row)


def write_propagation_records(
    path: Path,
    items: Iterable[tuple[SpecimenRecord, int]],
    propagations: dict[int, GroupPropagation],
    vocabulary: Sequence[str] = DEFAULT_TYPE_VOCABULARY,
) -> None:
    """Member-level report: annotation flags with the group propagable
    flags copied down to each record."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(
            ["record_id", "duplicate_group_id"]
            + list(ANNOTATION_CLASSES)
            + [f"{c}_propagable" for c in ANNOTATION_CLASSES]
            + ["name_divergent"]
        )
        for record, gid in items:
            flags = compute_annotation_flags(record, vocabulary)
            propagation = propagations[gid]
            writer.writerow(
                [record.record_id, str(gid)]
                + [_bool(flags.get(c)) for c in ANNOTATION_CLASSES]
                + [
                    _bool(propagation.for_class(c).propagable)
                    for c in ANNOTATION_CLASSES
                ]
                + [_bool(propagation.name_divergent)]
            )


def _write_graph_nodes(path: Path, graph: InstitutionGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["institution", "degree", "strength", "community"])
        for node in graph.nodes:
            writer.writerow(
                [
                    node,
                    str(graph.degree(node)),
                    str(graph.strength(node)),
                    str(graph.communities.get(node, "")),
                ]
            )
