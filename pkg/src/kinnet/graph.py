"""Weighted kinship graphs for one province and election year."""

from __future__ import annotations

import enum
import io
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import networkx as nx

from .records import ElectionRecord, Position

POSITION_WEIGHTS: dict[Position, int] = {
    Position.COUNCILOR: 2,
    Position.BOARD_MEMBER: 2,
    Position.VICE_MAYOR: 3,
    Position.VICE_GOVERNOR: 3,
    Position.MAYOR: 5,
    Position.HOUSE_REP: 5,
    Position.GOVERNOR: 5,
}


class MatchKind(str, enum.Enum):
    # declaration order is priority order
    BOTH_SAME = "BothSame"
    LAST_ONLY = "LastOnly"
    CROSS_MATCH = "CrossMatch"
    MIDDLE_ONLY = "MiddleOnly"

    @property
    def scalar(self) -> float:
        return _SCALARS[self]


_SCALARS = {
    MatchKind.BOTH_SAME: 1.00,
    MatchKind.LAST_ONLY: 0.75,
    MatchKind.CROSS_MATCH: 0.50,
    MatchKind.MIDDLE_ONLY: 0.25,
}


def position_weight(position: Position) -> int:
    return POSITION_WEIGHTS[position]


def classify_match(a: ElectionRecord, b: ElectionRecord) -> MatchKind | None:
    """Strongest name-based tie between two officials, or None."""
    same_last = bool(a.last_name) and a.last_name == b.last_name
    same_middle = a.middle_name is not None and a.middle_name == b.middle_name
    if same_last and same_middle:
        return MatchKind.BOTH_SAME
    if same_last:
        return MatchKind.LAST_ONLY
    if (a.middle_name is not None and a.middle_name == b.last_name) or (
        b.middle_name is not None and b.middle_name == a.last_name
    ):
        return MatchKind.CROSS_MATCH
    if same_middle:
        return MatchKind.MIDDLE_ONLY
    return None


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    weight: float
    kind: MatchKind | None = None


@dataclass
class Graph:
    """Undirected weighted graph on nodes 0..n-1 with positive node weights."""

    node_weights: list[float]
    edges: list[Edge]

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[tuple], node_weights: Sequence[float] | None = None) -> Graph:
        edges = []
        for p in pairs:
            u, v = p[0], p[1]
            w = p[2] if len(p) > 2 else 1.0
            edges.append(Edge(min(u, v), max(u, v), float(w)))
        weights = list(node_weights) if node_weights is not None else [1.0] * n
        return cls(node_weights=weights, edges=edges)

    @property
    def n_nodes(self) -> int:
        return len(self.node_weights)

    def adjacency(self, weighted: bool = True) -> list[dict[int, float]]:
        adj: list[dict[int, float]] = [dict() for _ in range(self.n_nodes)]
        for e in self.edges:
            w = e.weight if weighted else 1.0
            adj[e.u][e.v] = adj[e.u].get(e.v, 0.0) + w
            adj[e.v][e.u] = adj[e.v].get(e.u, 0.0) + w
        return adj

    def weighted_degrees(self) -> list[float]:
        deg = [0.0] * self.n_nodes
        for e in self.edges:
            deg[e.u] += e.weight
            deg[e.v] += e.weight
        return deg

    def subgraph_adjacency(self, nodes: Iterable[int]) -> dict[int, set[int]]:
        keep = set(nodes)
        adj: dict[int, set[int]] = {v: set() for v in keep}
        for e in self.edges:
            if e.u in keep and e.v in keep:
                adj[e.u].add(e.v)
                adj[e.v].add(e.u)
        return adj


@dataclass
class KinGraph(Graph):
    records: list[ElectionRecord] = field(default_factory=list)
    source_index: list[int] = field(default_factory=list)
    province: str = ""
    year: int = 0

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.records]


def _node_sort_key(r: ElectionRecord) -> tuple:
    return (r.last_name, r.first_name, r.middle_name or "", r.position.value)


def build_graph(records: Sequence[ElectionRecord]) -> KinGraph:
    """One node per record, one edge per name-matched pair.

    Nodes are ordered by a stable sort on (last, first, middle, position);
    ``source_index[i]`` is node i's position in the input sequence.
    """
    if not records:
        raise ValueError("build_graph needs at least one record")
    order = sorted(range(len(records)), key=lambda i: _node_sort_key(records[i]))
    recs = [records[i] for i in order]
    weights = [float(position_weight(r.position)) for r in recs]

    # only pairs sharing some name token can match
    by_token: dict[str, set[int]] = defaultdict(set)
    for i, r in enumerate(recs):
        by_token[r.last_name].add(i)
        if r.middle_name is not None:
            by_token[r.middle_name].add(i)
    pairs: set[tuple[int, int]] = set()
    for members in by_token.values():
        if len(members) > 1:
            pairs.update(combinations(sorted(members), 2))

    edges = []
    for u, v in sorted(pairs):
        kind = classify_match(recs[u], recs[v])
        if kind is not None:
            edges.append(Edge(u, v, weights[u] * weights[v] * kind.scalar, kind))
    provinces = {r.province for r in recs}
    years = {r.year for r in recs}
    return KinGraph(
        node_weights=weights,
        edges=edges,
        records=recs,
        source_index=order,
        province=provinces.pop() if len(provinces) == 1 else "",
        year=years.pop() if len(years) == 1 else 0,
    )


# --- GraphML -----------------------------------------------------------------

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"


def to_networkx(graph: KinGraph, communities: Sequence[int] | None = None) -> nx.Graph:
    g = nx.Graph()
    g.graph["province"] = graph.province
    g.graph["year"] = graph.year
    for i, r in enumerate(graph.records):
        g.add_node(
            f"n{i}",
            label=r.label,
            position=r.position.value,
            party=r.party or "",
            weight=graph.node_weights[i],
            community_id=-1 if communities is None else int(communities[i]),
        )
    for e in graph.edges:
        g.add_edge(f"n{e.u}", f"n{e.v}", weight=e.weight, match_kind=e.kind.value if e.kind else "")
    return g


def graphml_string(graph: KinGraph, communities: Sequence[int] | None = None, meta: str = "") -> str:
    g = to_networkx(graph, communities)
    if meta:
        g.graph["meta"] = meta
    buf = io.BytesIO()
    nx.write_graphml_xml(g, buf, encoding="utf-8", prettyprint=True)
    return buf.getvalue().decode("utf-8")


def write_graphml(graph: KinGraph, path: str | Path, communities: Sequence[int] | None = None, meta: str = "") -> None:
    Path(path).write_text(graphml_string(graph, communities, meta), encoding="utf-8")


_GRAPHML_TYPES = {"boolean", "int", "long", "float", "double", "string"}
_GRAPHML_DOMAINS = {"graph", "node", "edge", "all", "graphml", "hyperedge", "port", "endpoint"}


def validate_graphml(text: str) -> list[str]:
    """Structural GraphML checks; returns a list of problems (empty when valid).

    Covers the constraints of the GraphML schema that matter for our files:
    root element and namespace, key declarations (id, for, attr.type), data
    elements referencing declared keys of the right domain, unique node ids,
    edges with declared endpoints, and an edgedefault on every graph.
    """
    problems: list[str] = []
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        return [f"not well-formed XML: {exc}"]
    q = lambda tag: f"{{{GRAPHML_NS}}}{tag}"  # noqa: E731
    if root.tag != q("graphml"):
        return [f"root element is {root.tag}, expected graphml in namespace {GRAPHML_NS}"]

    keys: dict[str, str] = {}
    for k in root.findall(q("key")):
        kid = k.get("id")
        if not kid:
            problems.append("key without id")
            continue
        if kid in keys:
            problems.append(f"duplicate key id {kid}")
        dom = k.get("for", "all")
        if dom not in _GRAPHML_DOMAINS:
            problems.append(f"key {kid} has invalid for={dom}")
        t = k.get("attr.type")
        if t is not None and t not in _GRAPHML_TYPES:
            problems.append(f"key {kid} has invalid attr.type={t}")
        keys[kid] = dom

    def check_data(elem: ET.Element, domain: str) -> None:
        for d in elem.findall(q("data")):
            kid = d.get("key")
            if kid not in keys:
                problems.append(f"data references undeclared key {kid}")
            elif keys[kid] not in (domain, "all"):
                problems.append(f"key {kid} declared for {keys[kid]} used on {domain}")

    graphs = root.findall(q("graph"))
    if not graphs:
        problems.append("no graph element")
    for g in graphs:
        if g.get("edgedefault") not in ("directed", "undirected"):
            problems.append("graph lacks a valid edgedefault")
        check_data(g, "graph")
        ids: set[str] = set()
        for n in g.findall(q("node")):
            nid = n.get("id")
            if not nid:
                problems.append("node without id")
            elif nid in ids:
                problems.append(f"duplicate node id {nid}")
            ids.add(nid or "")
            check_data(n, "node")
        for e in g.findall(q("edge")):
            for end in ("source", "target"):
                if e.get(end) not in ids:
                    problems.append(f"edge {end} {e.get(end)} is not a node")
            check_data(e, "edge")
    return problems
