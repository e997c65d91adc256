"""Independent oracle implementations used to cross-check the pipeline.

Everything here is deliberately naive (quadratic scans, exhaustive
enumeration) and shares no code with the implementations it verifies.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

from specdedup.records import SpecimenRecord


def dp_levenshtein(a: str, b: str) -> int:
    """Textbook full-matrix edit distance."""
    rows = len(a) + 1
    cols = len(b) + 1
    grid = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        grid[i][0] = i
    for j in range(cols):
        grid[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            grid[i][j] = min(
                grid[i - 1][j] + 1, grid[i][j - 1] + 1, grid[i - 1][j - 1] + cost
            )
    return grid[-1][-1]


def connected_components(items: Sequence, linked) -> set[frozenset]:
    """Components of the graph {(a, b): linked(a, b)} via repeated sweeps."""
    remaining = list(items)
    components: list[set] = []
    while remaining:
        component = {remaining.pop()}
        grew = True
        while grew:
            grew = False
            for item in list(remaining):
                if any(linked(item, member) for member in component):
                    component.add(item)
                    remaining.remove(item)
                    grew = True
        components.append(component)
    return {frozenset(c) for c in components}


def naive_strip_prefix(raw: str) -> str:
    """Alphabetic-prefix stripping as an independent character scan."""
    i = 0
    while i < len(raw) and not raw[i].isdigit() and (
        raw[i].isalpha() or raw[i].isspace() or raw[i] in ".-'"
    ):
        i += 1
    return raw[i:].rstrip()


def naive_group_partition(
    labelled: Sequence[tuple[SpecimenRecord, int]]
) -> set[frozenset[str]]:
    """Quadratic union of records sharing the duplicate-group key."""
    n = len(labelled)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def key(entry: tuple[SpecimenRecord, int]):
        record, collector_id = entry
        return (
            collector_id,
            record.event_date,
            naive_strip_prefix(record.record_number_raw).casefold(),
        )

    keys = [key(entry) for entry in labelled]
    for i in range(n):
        for j in range(i + 1, n):
            if keys[i] == keys[j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, set[str]] = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(labelled[i][0].record_id)
    return {frozenset(g) for g in groups.values()}


def naive_assessment(members: Sequence[SpecimenRecord]) -> tuple[bool, bool, bool]:
    """Distinct-value agreement per assessment field, missing ignored."""
    flags = []
    for getter in (
        lambda r: r.country_code,
        lambda r: r.taxon_order,
        lambda r: r.family,
    ):
        values = {
            " ".join(getter(r).split()).casefold()
            for r in members
            if getter(r) is not None
        }
        flags.append(len(values) <= 1)
    return tuple(flags)


def naive_propagation_totals(
    groups: Iterable[Sequence[tuple[bool, bool, bool]]]
) -> dict[str, tuple[int, int]]:
    """(groups_propagable, specimens_receivable) per annotation class."""
    totals = {"georef": [0, 0], "typestatus": [0, 0], "image": [0, 0]}
    order = ("georef", "typestatus", "image")
    for members in groups:
        for position, annotation_class in enumerate(order):
            values = [flags[position] for flags in members]
            if any(values) and not all(values):
                totals[annotation_class][0] += 1
                totals[annotation_class][1] += sum(1 for v in values if not v)
    return {k: (v[0], v[1]) for k, v in totals.items()}


def brute_force_pair_weights(
    group_institutions: Iterable[Iterable[str]],
) -> dict[tuple[str, str], int]:
    """Edge weights by explicit per-group pair enumeration."""
    weights: dict[tuple[str, str], int] = {}
    for institutions in group_institutions:
        for a, b in itertools.combinations(sorted(set(institutions)), 2):
            weights[(a, b)] = weights.get((a, b), 0) + 1
    return weights


def set_partitions(items: Sequence):
    """All partitions of items (restricted-growth enumeration)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in set_partitions(rest):
        for i in range(len(partial)):
            yield partial[:i] + [[first] + partial[i]] + partial[i + 1 :]
        yield [[first]] + partial


def exhaustive_modularity(graph, resolution: float = 1.0) -> float:
    """Best modularity over every partition; only viable for tiny graphs."""
    nodes = graph.nodes
    edges = list(graph.edges())
    m = sum(w for _, _, w in edges)
    if m == 0:
        return 0.0
    strength = {n: 0 for n in nodes}
    for u, v, w in edges:
        strength[u] += w
        strength[v] += w
    best = float("-inf")
    for partition in set_partitions(nodes):
        q = 0.0
        for community in partition:
            community_set = set(community)
            internal = sum(w for u, v, w in edges if u in community_set and v in community_set)
            total = sum(strength[n] for n in community)
            q += internal / m - resolution * (total / (2 * m)) ** 2
        best = max(best, q)
    return best


def single_move_local_optimum(graph, communities: dict[str, int], modularity_fn) -> bool:
    """No single-node move (to a neighbor community or isolation) gains Q."""
    base = modularity_fn(graph, communities)
    fresh = max(communities.values()) + 1
    for node in graph.nodes:
        targets = {communities[nbr] for nbr in graph.neighbors(node)}
        targets.add(fresh)
        for target in targets:
            if target == communities[node]:
                continue
            trial = dict(communities)
            trial[node] = target
            if modularity_fn(graph, trial) > base + 1e-9:
                return False
    return True
