"""Reconcile specimen duplicates across repositories.

Pipeline: ingest occurrence data, cluster collector name variants,
group records into duplicate sets, assess each set's internal
consistency, quantify propagable annotations, and derive the weighted
institution co-occurrence graph with community detection.
"""

from .assess import GroupAssessment, assess_group, conservative_filter
from .collectors import (
    CollectorEntity,
    ParsedName,
    assign_collector_ids,
    cluster_collectors,
    extract_primary,
    name_distance,
    parse_name,
)
from .corpus import CorpusConfig, generate_corpus, score_groups
from .dedup import (
    DuplicateGroup,
    GroupKey,
    detect_duplicate_groups,
    normalize_record_number,
)
from .errors import ConfigError, GraphError, IngestError, PipelineError, SpecdedupError
from .graph import (
    InstitutionGraph,
    build_graph,
    export_graph,
    louvain_communities,
    modularity,
)
from .ingest import ColumnMapping, is_eligible, parse_event_date, parse_source
from .pipeline import PipelineConfig, RunReport, run_pipeline
from .propagate import (
    AnnotationFlags,
    GroupPropagation,
    PropagationSummary,
    compute_annotation_flags,
    find_propagable,
    summarize,
)
from .records import SpecimenRecord

__version__ = "0.1.0"

__all__ = [
    "AnnotationFlags",
    "CollectorEntity",
    "ColumnMapping",
    "ConfigError",
    "CorpusConfig",
    "DuplicateGroup",
    "GraphError",
    "GroupAssessment",
    "GroupKey",
    "GroupPropagation",
    "IngestError",
    "InstitutionGraph",
    "ParsedName",
    "PipelineConfig",
    "PipelineError",
    "PropagationSummary",
    "RunReport",
    "SpecdedupError",
    "SpecimenRecord",
    "assess_group",
    "assign_collector_ids",
    "build_graph",
    "cluster_collectors",
    "compute_annotation_flags",
    "conservative_filter",
    "detect_duplicate_groups",
    "export_graph",
    "extract_primary",
    "find_propagable",
    "generate_corpus",
    "is_eligible",
    "louvain_communities",
    "modularity",
    "name_distance",
    "normalize_record_number",
    "parse_event_date",
    "parse_name",
    "parse_source",
    "run_pipeline",
    "score_groups",
    "summarize",
]
