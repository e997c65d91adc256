"""Command line interface.

Each stage subcommand consumes the previous stage's checkpoint file so a
run can be resumed or inspected mid-way; ``run`` executes the whole
pipeline into one output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import assess as assess_mod
from . import dedup as dedup_mod
from .checkpoints import read_checkpoint, write_checkpoint
from .collectors import (
    LabelledRecord,
    LabelStats,
    assign_collector_ids,
    resolve_collectors,
)
from .corpus import CorpusConfig, generate_corpus, read_truth, score_groups
from .errors import SpecdedupError
from .graph import build_graph, export_graph, louvain_communities
from .ingest import (
    ColumnMapping,
    ParseStats,
    ensure_unique_ids,
    load_mapping_file,
    parse_source,
)
from .pipeline import (
    GRAPH_EXPORT_FILES,
    PipelineConfig,
    run_pipeline,
    write_propagation_records,
)
from .propagate import (
    DEFAULT_TYPE_VOCABULARY,
    find_propagable,
    load_type_vocabulary,
    summarize,
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SpecdedupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specdedup",
        description="Detect specimen duplicate groups and quantify propagable metadata.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a source file to the canonical checkpoint")
    _add_mapping_options(p)
    p.add_argument("input", nargs="+", help="delimited file(s) or Darwin Core archive(s)")
    p.add_argument("-o", "--output", required=True, help="canonical checkpoint path")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("cluster-collectors", help="label records with collector ids")
    p.add_argument("input", help="canonical checkpoint")
    p.add_argument("-o", "--output", required=True, help="labelled checkpoint path")
    p.add_argument("--entities", help="entity table output path")
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--min-pts", type=int, default=1)
    p.set_defaults(handler=_cmd_cluster)

    p = sub.add_parser("dedup", help="group labelled records into duplicate groups")
    p.add_argument("input", help="labelled checkpoint")
    p.add_argument("-o", "--output", required=True, help="grouped checkpoint path")
    p.add_argument("--partitions", type=int, default=1, help="spill partitions (1 = in memory)")
    p.set_defaults(handler=_cmd_dedup)

    p = sub.add_parser("assess", help="flag per-group agreement and select conservative groups")
    p.add_argument("input", help="grouped checkpoint")
    p.add_argument("-o", "--output", required=True, help="assessed checkpoint path")
    p.add_argument("--flags-tsv", help="flag combination report (tsv)")
    p.add_argument("--flags-json", help="flag combination report (json)")
    p.add_argument("--strict-missing", action="store_true",
                   help="count a missing assessment value as a distinct value")
    p.set_defaults(handler=_cmd_assess)

    p = sub.add_parser("propagate", help="detect propagable annotations and summarize")
    p.add_argument("input", help="assessed checkpoint")
    p.add_argument("--groups-out", required=True, help="group-level report path")
    p.add_argument("--summary-json", required=True, help="propagation summary path")
    p.add_argument("--records-out", help="member-level report with flags copied down")
    p.add_argument("--type-vocab", help="type status vocabulary file")
    p.set_defaults(handler=_cmd_propagate)

    p = sub.add_parser("graph", help="build and export the institution graph")
    p.add_argument("input", help="assessed checkpoint")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--formats", default="graphml,dot,edgelist-csv",
                   help="comma-separated subset of graphml,dot,edgelist-csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=float, default=1.0)
    p.set_defaults(handler=_cmd_graph)

    p = sub.add_parser("run", help="run the full pipeline")
    _add_mapping_options(p)
    p.add_argument("input", nargs="+", help="source file(s)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--min-pts", type=int, default=1)
    p.add_argument("--strict-missing", action="store_true")
    p.add_argument("--type-vocab", help="type status vocabulary file")
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--graph-formats", default="graphml,dot,edgelist-csv")
    p.add_argument("--no-checkpoints", action="store_true",
                   help="skip stage checkpoint files (reports are still written)")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus with ground truth")
    p.add_argument("--collectors", type=int, required=True)
    p.add_argument("--events", type=int, required=True)
    p.add_argument("--group-size", default="uniform:1:6",
                   help="fixed:N or uniform:MIN:MAX")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="corpus file path")
    p.add_argument("--truth", required=True, help="ground truth file path")
    p.add_argument("--institutions", type=int, default=200)
    p.add_argument("--georef-rate", type=float, default=0.5)
    p.add_argument("--typestatus-rate", type=float, default=0.15)
    p.add_argument("--image-rate", type=float, default=0.4)
    p.add_argument("--name-divergence-rate", type=float, default=0.05)
    p.add_argument("--field-divergence-rate", type=float, default=0.0)
    p.set_defaults(handler=_cmd_gen_corpus)

    p = sub.add_parser("score", help="score detected groups against ground truth")
    p.add_argument("--detected", required=True, help="grouped checkpoint")
    p.add_argument("--truth", required=True, help="ground truth file")
    p.set_defaults(handler=_cmd_score)

    return parser


def _add_mapping_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mapping", help="column mapping file (key=value)")
    p.add_argument("--map", action="append", default=[], metavar="FIELD=COLUMN",
                   help="override one canonical field mapping (repeatable)")
    p.add_argument("--delimiter", default=None,
                   help="source delimiter: tab, comma or a literal character")
    p.add_argument("--quotechar", default=None)
    p.add_argument("--no-header", action="store_true",
                   help="source has no header row (use column indices in mappings)")


def _mapping_from_args(args: argparse.Namespace) -> ColumnMapping | None:
    mapping = load_mapping_file(args.mapping) if args.mapping else None
    if not (args.map or args.delimiter or args.quotechar or args.no_header):
        return mapping
    if mapping is None:
        mapping = ColumnMapping()
    for override in args.map:
        fld, _, column = override.partition("=")
        mapping.columns[fld.strip()] = column.strip()
    if args.delimiter:
        mapping.delimiter = {"tab": "\t", "comma": ","}.get(args.delimiter, args.delimiter)
    if args.quotechar:
        mapping.quotechar = args.quotechar
    if args.no_header:
        mapping.has_header = False
    mapping.validate()
    return mapping


def _cmd_ingest(args: argparse.Namespace) -> int:
    mapping = _mapping_from_args(args)
    stats = ParseStats()
    records = ensure_unique_ids(
        (
            record
            for path in args.input
            for record in parse_source(path, mapping, stats)
        ),
        stats,
    )
    count = write_checkpoint(args.output, ((record, ()) for record in records))
    print(
        f"rows_read={stats.rows_read} rows_skipped={stats.rows_skipped} "
        f"records={count} id_collisions={stats.id_collisions}"
    )
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    records = [record for record, _ in read_checkpoint(args.input)]
    entities = resolve_collectors(records, eps=args.eps, min_pts=args.min_pts)
    stats = LabelStats()
    write_checkpoint(
        args.output,
        (
            (item.record, (str(item.collector_id),))
            for item in assign_collector_ids(records, entities, stats)
        ),
        extra_columns=("collector_id",),
    )
    if args.entities:
        from .pipeline import _write_entities

        _write_entities(Path(args.entities), entities)
    print(f"labelled={stats.labelled} excluded={stats.excluded} entities={len(entities)}")
    return 0


def _read_labelled(path: str) -> list[LabelledRecord]:
    return [
        LabelledRecord(record=record, collector_id=int(extras[0]))
        for record, extras in read_checkpoint(path, expect_extras=("collector_id",))
    ]


def _cmd_dedup(args: argparse.Namespace) -> int:
    grouped, groups = dedup_mod.detect_duplicate_groups(
        _read_labelled(args.input), partitions=args.partitions
    )
    write_checkpoint(
        args.output,
        (
            (item.record, (str(item.collector_id), str(item.duplicate_group_id)))
            for item in grouped
        ),
        extra_columns=("collector_id", "duplicate_group_id"),
    )
    n_min2, n_dup = dedup_mod.duplicate_relationship_counts(groups)
    print(f"groups={len(groups)} groups_min2={n_min2} duplicate_records={n_dup}")
    return 0


def _read_grouped(path: str):
    from .dedup import GroupedRecord

    for record, extras in read_checkpoint(
        path, expect_extras=("collector_id", "duplicate_group_id")
    ):
        yield GroupedRecord(
            record=record,
            collector_id=int(extras[0]),
            duplicate_group_id=int(extras[1]),
        )


def _cmd_assess(args: argparse.Namespace) -> int:
    grouped = list(_read_grouped(args.input))
    members: dict[int, list] = {}
    for item in grouped:
        members.setdefault(item.duplicate_group_id, []).append(item.record)
    assessments = {
        gid: assess_mod.assess_group(recs, gid, strict_missing=args.strict_missing)
        for gid, recs in members.items()
    }
    cells = assess_mod.FlagCellCounts()
    conservative = 0
    for gid, recs in members.items():
        cells.add(assessments[gid], len(recs))
        if assessments[gid].conservative:
            conservative += 1
    write_checkpoint(
        args.output,
        (
            (
                item.record,
                (
                    str(item.collector_id),
                    str(item.duplicate_group_id),
                    *(
                        "true" if flag else "false"
                        for flag in assessments[item.duplicate_group_id].cell
                    ),
                    "true" if assessments[item.duplicate_group_id].conservative else "false",
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
    if args.flags_tsv:
        with open(args.flags_tsv, "w", encoding="utf-8", newline="") as handle:
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
    if args.flags_json:
        Path(args.flags_json).write_text(
            json.dumps(cells.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )
    print(f"groups={len(members)} conservative_groups={conservative}")
    return 0


def _read_assessed(path: str):
    extras = (
        "collector_id",
        "duplicate_group_id",
        "countrycode_conservative",
        "order_conservative",
        "family_conservative",
        "conservative",
    )
    for record, values in read_checkpoint(path, expect_extras=extras):
        yield record, int(values[1]), values[5] == "true"


def _cmd_propagate(args: argparse.Namespace) -> int:
    vocabulary = (
        load_type_vocabulary(args.type_vocab) if args.type_vocab else DEFAULT_TYPE_VOCABULARY
    )
    members: dict[int, list] = {}
    ordered_items: list[tuple] = []
    conservative_ids: set[int] = set()
    for record, gid, conservative in _read_assessed(args.input):
        members.setdefault(gid, []).append(record)
        ordered_items.append((record, gid))
        if conservative:
            conservative_ids.add(gid)
    propagations = {
        gid: find_propagable(recs, gid, vocabulary=vocabulary)
        for gid, recs in members.items()
    }
    summary = summarize(propagations[gid] for gid in sorted(conservative_ids))
    if args.records_out:
        write_propagation_records(
            Path(args.records_out), ordered_items, propagations, vocabulary
        )
    with open(args.groups_out, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        header = ["duplicate_group_id", "size", "conservative"]
        for annotation_class in ("georef", "typestatus", "image"):
            header += [
                f"{annotation_class}_any",
                f"{annotation_class}_all",
                f"{annotation_class}_propagable",
                f"{annotation_class}_with",
                f"{annotation_class}_without",
            ]
        header.append("name_divergent")
        writer.writerow(header)
        for gid in sorted(members):
            propagation = propagations[gid]
            row = [str(gid), str(propagation.size), "true" if gid in conservative_ids else "false"]
            for annotation_class in ("georef", "typestatus", "image"):
                state = propagation.for_class(annotation_class)
                row += [
                    "true" if state.any_set else "false",
                    "true" if state.all_set else "false",
                    "true" if state.propagable else "false",
                    str(state.count_with),
                    str(state.count_without),
                ]
            row.append("true" if propagation.name_divergent else "false")
            writer.writerow(row)
    Path(args.summary_json).write_text(
        json.dumps(summary.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    print(json.dumps(summary.to_json_dict()))
    return 0


def _cmd_graph(args: argparse.Namespace) -> int:
    members: dict[int, list[str]] = {}
    conservative_ids: set[int] = set()
    for record, gid, conservative in _read_assessed(args.input):
        members.setdefault(gid, []).append(record.institution_code)
        if conservative:
            conservative_ids.add(gid)
    graph = build_graph(members[gid] for gid in sorted(conservative_ids))
    if graph.n_nodes:
        result = louvain_communities(graph, seed=args.seed, resolution=args.resolution)
        graph.communities = result.communities
        graph.modularity = result.modularity
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    for fmt in formats:
        export_graph(graph, out_dir / GRAPH_EXPORT_FILES.get(fmt, f"graph.{fmt}"), fmt)
    communities = len(set(graph.communities.values())) if graph.communities else 0
    print(
        f"nodes={graph.n_nodes} edges={graph.n_edges} communities={communities} "
        f"modularity={graph.modularity}"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    vocabulary = (
        load_type_vocabulary(args.type_vocab) if args.type_vocab else DEFAULT_TYPE_VOCABULARY
    )
    config = PipelineConfig(
        inputs=args.input,
        out_dir=args.out,
        mapping=_mapping_from_args(args),
        eps=args.eps,
        min_pts=args.min_pts,
        strict_missing=args.strict_missing,
        type_vocabulary=vocabulary,
        partitions=args.partitions,
        seed=args.seed,
        resolution=args.resolution,
        graph_formats=tuple(
            f.strip() for f in args.graph_formats.split(",") if f.strip()
        ),
        checkpoints=not args.no_checkpoints,
        figures=not args.no_figures,
    )
    report = run_pipeline(config)
    print(report.to_text(), end="")
    return 0


def _cmd_gen_corpus(args: argparse.Namespace) -> int:
    parts = args.group_size.split(":")
    if parts[0] == "fixed" and len(parts) == 2:
        size_dist, size_min, size_max = "fixed", int(parts[1]), int(parts[1])
    elif parts[0] == "uniform" and len(parts) == 3:
        size_dist, size_min, size_max = "uniform", int(parts[1]), int(parts[2])
    else:
        print(f"error: bad --group-size {args.group_size!r}", file=sys.stderr)
        return 2
    config = CorpusConfig(
        n_collectors=args.collectors,
        events_per_collector=args.events,
        size_dist=size_dist,
        size_min=size_min,
        size_max=size_max,
        seed=args.seed,
        institutions=args.institutions,
        georef_rate=args.georef_rate,
        typestatus_rate=args.typestatus_rate,
        image_rate=args.image_rate,
        name_divergence_rate=args.name_divergence_rate,
        field_divergence_rate=args.field_divergence_rate,
    )
    generated = generate_corpus(args.output, args.truth, config)
    print(f"rows={generated.rows} groups={generated.groups} collectors={generated.collectors}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    truth = read_truth(args.truth)
    detected = {
        record.record_id: extras[0]
        for record, extras in read_checkpoint(
            args.detected, expect_extras=("duplicate_group_id",)
        )
    }
    result = score_groups(detected, truth)
    print(json.dumps(result.to_json_dict()))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
