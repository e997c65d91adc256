"""Institution co-occurrence graph, community detection and exports.

Nodes are institution codes; an edge's weight counts the duplicate
groups the two institutions share (at most one contribution per group).
Community detection is greedy modularity optimization (the Louvain
method) made deterministic by a seeded visit order, with a final
node-level refinement pass so the returned partition is always a local
optimum under single-node moves.
"""

from __future__ import annotations

import csv
import random
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import GraphError

EXPORT_FORMATS = ("graphml", "dot", "edgelist-csv")

_GAIN_TOLERANCE = 1e-12


class InstitutionGraph:
    """Weighted undirected graph without self-loops."""

    def __init__(self) -> None:
        self._adj: dict[str, dict[str, int]] = {}
        self.communities: dict[str, int] = {}
        self.modularity: float | None = None

    def add_node(self, node: str) -> None:
        self._adj.setdefault(node, {})

    def add_edge(self, u: str, v: str, weight: int = 1) -> None:
        """Set the weight of edge u--v (replacing any previous value)."""
        if u == v:
            raise GraphError(f"self-loop rejected for node {u!r}")
        if weight < 1:
            raise GraphError(f"edge weight must be >= 1, got {weight}")
        self.add_node(u)
        self.add_node(v)
        self._adj[u][v] = weight
        self._adj[v][u] = weight

    def increment_edge(self, u: str, v: str, delta: int = 1) -> None:
        self.add_edge(u, v, self._adj.get(u, {}).get(v, 0) + delta)

    @property
    def nodes(self) -> list[str]:
        return sorted(self._adj)

    def has_node(self, node: str) -> bool:
        return node in self._adj

    def edges(self) -> Iterator[tuple[str, str, int]]:
        for u in self.nodes:
            for v, w in sorted(self._adj[u].items()):
                if u < v:
                    yield u, v, w

    def edge_dict(self) -> dict[tuple[str, str], int]:
        return {(u, v): w for u, v, w in self.edges()}

    @property
    def n_nodes(self) -> int:
        return len(self._adj)

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def neighbors(self, node: str) -> dict[str, int]:
        self._require(node)
        return dict(self._adj[node])

    def degree(self, node: str) -> int:
        """Number of incident edges (unweighted)."""
        self._require(node)
        return len(self._adj[node])

    def strength(self, node: str) -> int:
        """Total incident edge weight (weighted degree)."""
        self._require(node)
        return sum(self._adj[node].values())

    def total_weight(self) -> int:
        return sum(w for _, _, w in self.edges())

    def isolated_nodes(self) -> list[str]:
        return [n for n in self.nodes if not self._adj[n]]

    def _require(self, node: str) -> None:
        if node not in self._adj:
            raise GraphError(f"unknown node {node!r}")


def build_graph(group_institutions: Iterable[Iterable[str]]) -> InstitutionGraph:
    """Build the co-occurrence graph from per-group institution codes.

    Each unordered pair of distinct institutions present in one group
    adds 1 to that pair's edge weight; repeated sheets of one institution
    within a group contribute nothing extra.
    """
    graph = InstitutionGraph()
    for institutions in group_institutions:
        distinct = sorted(set(institutions))
        for institution in distinct:
            graph.add_node(institution)
        for i, a in enumerate(distinct):
            for b in distinct[i + 1 :]:
                graph.increment_edge(a, b)
    return graph


def modularity(
    graph: InstitutionGraph,
    partition: dict[str, int],
    resolution: float = 1.0,
) -> float:
    """Weighted modularity of a node partition; 0.0 for edgeless graphs."""
    m = graph.total_weight()
    if m == 0:
        return 0.0
    internal: dict[int, int] = {}
    degree_sum: dict[int, int] = {}
    for node in graph.nodes:
        community = partition[node]
        degree_sum[community] = degree_sum.get(community, 0) + graph.strength(node)
    for u, v, w in graph.edges():
        if partition[u] == partition[v]:
            internal[partition[u]] = internal.get(partition[u], 0) + w
    q = 0.0
    for community, total in degree_sum.items():
        q += internal.get(community, 0) / m - resolution * (total / (2 * m)) ** 2
    return q


@dataclass
class LouvainResult:
    communities: dict[str, int]
    modularity: float
    q_trace: list[float]

    @property
    def community_count(self) -> int:
        return len(set(self.communities.values()))


def louvain_communities(
    graph: InstitutionGraph,
    seed: int = 0,
    resolution: float = 1.0,
    restarts: int = 3,
) -> LouvainResult:
    """Detect communities by greedy modularity optimization.

    Runs the local-move phase and aggregation phase until no modularity
    gain remains, then refines at the original node level so the result
    is a local optimum under single-node moves. Deterministic for a given
    seed; with restarts > 1 the best of several seeded visit orders wins.
    """
    if graph.n_nodes == 0:
        raise GraphError("community detection requires a non-empty graph")
    nodes = graph.nodes
    index = {node: i for i, node in enumerate(nodes)}
    adj: list[dict[int, int]] = [{} for _ in nodes]
    for u, v, w in graph.edges():
        adj[index[u]][index[v]] = w
        adj[index[v]][index[u]] = w
    k = [sum(nbrs.values()) for nbrs in adj]
    two_m = sum(k)
    if two_m == 0:
        partition = {node: i for i, node in enumerate(nodes)}
        return LouvainResult(communities=partition, modularity=0.0, q_trace=[0.0])

    best: tuple[float, list[int], list[float]] | None = None
    for restart in range(max(1, restarts)):
        rng = random.Random(seed * 7919 + restart)
        flat, trace = _louvain_run(adj, k, two_m, resolution, rng)
        q = trace[-1]
        if best is None or q > best[0] + _GAIN_TOLERANCE:
            best = (q, flat, trace)
    q, flat, trace = best

    # Renumber communities by their smallest member in node-sorted order.
    relabel: dict[int, int] = {}
    communities: dict[str, int] = {}
    for i, node in enumerate(nodes):
        label = flat[i]
        if label not in relabel:
            relabel[label] = len(relabel)
        communities[node] = relabel[label]
    return LouvainResult(communities=communities, modularity=q, q_trace=trace)


def _louvain_run(
    adj: list[dict[int, int]],
    k: list[float],
    two_m: float,
    resolution: float,
    rng: random.Random,
) -> tuple[list[int], list[float]]:
    n = len(k)
    flat = list(range(n))
    trace = [_flat_modularity(adj, k, two_m, flat, resolution)]

    level_adj: list[dict[int, float]] = [dict(nbrs) for nbrs in adj]
    level_self = [0.0] * n
    level_k = list(map(float, k))
    while True:
        part = _one_level(level_adj, level_k, two_m, resolution, rng)
        flat = [part[c] for c in flat]
        q = _flat_modularity(adj, k, two_m, flat, resolution)
        if q - trace[-1] <= _GAIN_TOLERANCE:
            trace.append(max(q, trace[-1]))
            break
        trace.append(q)
        level_adj, level_self, level_k = _aggregate(
            level_adj, level_self, level_k, part
        )

    # Final refinement at the original node level guarantees a local
    # optimum under single-node moves of the returned flat partition.
    flat = _one_level(
        [dict(nbrs) for nbrs in adj], list(map(float, k)), two_m, resolution, rng,
        initial=flat,
    )
    q = _flat_modularity(adj, k, two_m, flat, resolution)
    if q > trace[-1]:
        trace.append(q)
    return flat, trace


def _one_level(
    adj: list[dict[int, float]],
    k: list[float],
    two_m: float,
    resolution: float,
    rng: random.Random,
    initial: list[int] | None = None,
) -> list[int]:
    """Move nodes between communities until no single move gains modularity."""
    n = len(k)
    part = list(initial) if initial is not None else list(range(n))
    tot: dict[int, float] = {}
    for v in range(n):
        tot[part[v]] = tot.get(part[v], 0.0) + k[v]
    fresh_label = max(part) + 1 if part else 0
    order = list(range(n))
    rng.shuffle(order)
    while True:
        moved = False
        for v in order:
            com = part[v]
            neigh: dict[int, float] = {}
            for u, w in adj[v].items():
                if u != v:
                    c = part[u]
                    neigh[c] = neigh.get(c, 0.0) + w
            tot[com] -= k[v]
            best_com = com
            best_score = neigh.get(com, 0.0) - resolution * tot[com] * k[v] / two_m
            for c in sorted(neigh):
                if c == com:
                    continue
                score = neigh[c] - resolution * tot[c] * k[v] / two_m
                if score > best_score + _GAIN_TOLERANCE:
                    best_com, best_score = c, score
            if 0.0 > best_score + _GAIN_TOLERANCE:
                # Isolating the node in a fresh community is the best move.
                best_com = fresh_label
                fresh_label += 1
            tot[best_com] = tot.get(best_com, 0.0) + k[v]
            if best_com != com:
                part[v] = best_com
                moved = True
        if not moved:
            break
    return _renumber(part)


def _renumber(part: list[int]) -> list[int]:
    mapping: dict[int, int] = {}
    out = []
    for label in part:
        if label not in mapping:
            mapping[label] = len(mapping)
        out.append(mapping[label])
    return out


def _aggregate(
    adj: list[dict[int, float]],
    self_w: list[float],
    k: list[float],
    part: list[int],
) -> tuple[list[dict[int, float]], list[float], list[float]]:
    n_communities = max(part) + 1
    new_adj: list[dict[int, float]] = [{} for _ in range(n_communities)]
    new_self = [0.0] * n_communities
    new_k = [0.0] * n_communities
    for v, nbrs in enumerate(adj):
        cv = part[v]
        new_self[cv] += self_w[v]
        new_k[cv] += k[v]
        for u, w in nbrs.items():
            cu = part[u]
            if cu == cv:
                if u > v:
                    new_self[cv] += w
            else:
                new_adj[cv][cu] = new_adj[cv].get(cu, 0.0) + w
    return new_adj, new_self, new_k


def _flat_modularity(
    adj: list[dict[int, float]],
    k: list[float],
    two_m: float,
    part: list[int],
    resolution: float,
) -> float:
    internal: dict[int, float] = {}
    degree_sum: dict[int, float] = {}
    for v in range(len(k)):
        c = part[v]
        degree_sum[c] = degree_sum.get(c, 0.0) + k[v]
        for u, w in adj[v].items():
            if u > v and part[u] == c:
                internal[c] = internal.get(c, 0.0) + w
    m = two_m / 2.0
    q = 0.0
    for c, total in degree_sum.items():
        q += internal.get(c, 0.0) / m - resolution * (total / two_m) ** 2
    return q


# ---------------------------------------------------------------------------
# Export / import


def export_graph(graph: InstitutionGraph, path: str | Path, fmt: str) -> None:
    """Write the graph as graphml, dot or edgelist-csv."""
    writers = {
        "graphml": write_graphml,
        "dot": write_dot,
        "edgelist-csv": write_edgelist_csv,
    }
    if fmt not in writers:
        raise GraphError(f"unknown export format {fmt!r}; expected one of {EXPORT_FORMATS}")
    try:
        writers[fmt](graph, path)
    except OSError as exc:
        raise GraphError(f"cannot write {path}: {exc}") from exc


def write_graphml(graph: InstitutionGraph, path: str | Path) -> None:
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    keys = [
        ("d_degree", "node", "degree", "int"),
        ("d_strength", "node", "strength", "int"),
        ("d_community", "node", "community", "int"),
        ("d_weight", "edge", "weight", "int"),
    ]
    for key_id, domain, name, dtype in keys:
        ET.SubElement(
            root, "key", id=key_id, **{"for": domain, "attr.name": name, "attr.type": dtype}
        )
    el_graph = ET.SubElement(root, "graph", id="institutions", edgedefault="undirected")
    for node in graph.nodes:
        el_node = ET.SubElement(el_graph, "node", id=node)
        _data(el_node, "d_degree", graph.degree(node))
        _data(el_node, "d_strength", graph.strength(node))
        if node in graph.communities:
            _data(el_node, "d_community", graph.communities[node])
    for u, v, w in graph.edges():
        el_edge = ET.SubElement(el_graph, "edge", source=u, target=v)
        _data(el_edge, "d_weight", w)
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="unicode", xml_declaration=True)


def _data(parent: ET.Element, key: str, value: object) -> None:
    el = ET.SubElement(parent, "data", key=key)
    el.text = str(value)


def read_graphml(path: str | Path) -> InstitutionGraph:
    try:
        root = ET.parse(path).getroot()
    except (OSError, ET.ParseError) as exc:
        raise GraphError(f"cannot read graphml {path}: {exc}") from exc
    key_names = {}
    for el in root.iter():
        if el.tag.rsplit("}", 1)[-1] == "key":
            key_names[el.get("id")] = el.get("attr.name")
    graph = InstitutionGraph()
    for el in root.iter():
        tag = el.tag.rsplit("}", 1)[-1]
        if tag == "node":
            node = el.get("id")
            graph.add_node(node)
            for data in el:
                if key_names.get(data.get("key")) == "community":
                    graph.communities[node] = int(data.text)
        elif tag == "edge":
            weight = 1
            for data in el:
                if key_names.get(data.get("key")) == "weight":
                    weight = int(data.text)
            graph.add_edge(el.get("source"), el.get("target"), weight)
    return graph


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_unquote(name: str) -> str:
    return name.replace('\\"', '"').replace("\\\\", "\\")


def write_dot(graph: InstitutionGraph, path: str | Path) -> None:
    lines = ["graph institutions {"]
    for node in graph.nodes:
        attrs = [f"degree={graph.degree(node)}", f"strength={graph.strength(node)}"]
        if node in graph.communities:
            attrs.append(f"community={graph.communities[node]}")
        lines.append(f"  {_dot_quote(node)} [{', '.join(attrs)}];")
    for u, v, w in graph.edges():
        lines.append(f"  {_dot_quote(u)} -- {_dot_quote(v)} [weight={w}];")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_DOT_NODE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)"\s*\[(.*)\];\s*$')
_DOT_EDGE = re.compile(
    r'^\s*"((?:[^"\\]|\\.)*)"\s*--\s*"((?:[^"\\]|\\.)*)"\s*\[weight=(\d+)\];\s*$'
)


def read_dot(path: str | Path) -> InstitutionGraph:
    """Read the DOT subset emitted by write_dot."""
    graph = InstitutionGraph()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphError(f"cannot read dot {path}: {exc}") from exc
    for line in text.splitlines():
        edge = _DOT_EDGE.match(line)
        if edge:
            graph.add_edge(
                _dot_unquote(edge.group(1)), _dot_unquote(edge.group(2)), int(edge.group(3))
            )
            continue
        node = _DOT_NODE.match(line)
        if node:
            name = _dot_unquote(node.group(1))
            graph.add_node(name)
            m = re.search(r"community=(\d+)", node.group(2))
            if m:
                graph.communities[name] = int(m.group(1))
    return graph


def write_edgelist_csv(graph: InstitutionGraph, path: str | Path) -> None:
    """CSV edge list; carries edges and weights but not isolated nodes."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["source", "target", "weight"])
        for u, v, w in graph.edges():
            writer.writerow([u, v, w])


def read_edgelist_csv(path: str | Path) -> InstitutionGraph:
    graph = InstitutionGraph()
    try:
        handle = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise GraphError(f"cannot read edge list {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["source", "target", "weight"]:
            raise GraphError(f"{path}: expected header source,target,weight")
        for row in reader:
            if row:
                graph.add_edge(row[0], row[1], int(row[2]))
    return graph
