"""The four dynastic indicators: political HHI, centrality Gini, CCD and ACC."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .community import Partition, partition_from_labels
from .graph import Graph, KinGraph, build_graph
from .records import ElectionRecord, group_by_province_year

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndicatorRow:
    province: str
    year: int
    hhi: float
    cgc: float | None
    ccd: float
    acc: float
    n_nodes: int
    n_edges: int
    n_communities: int
    n_components: int

    def to_dict(self) -> dict:
        return asdict(self)


def _assignment(partition: Partition | Sequence[int]) -> Sequence[int]:
    return partition.assignment if isinstance(partition, Partition) else partition


def political_hhi(graph: Graph, partition: Partition | Sequence[int]) -> float:
    """Sum over communities of (community node weight / total node weight * 100)^2."""
    assignment = _assignment(partition)
    if graph.n_nodes == 0:
        raise ValueError("HHI of an empty graph is undefined")
    if len(assignment) != graph.n_nodes:
        raise ValueError("partition does not cover every node")
    shares: dict[int, float] = {}
    for w, c in zip(graph.node_weights, assignment):
        shares[c] = shares.get(c, 0.0) + w
    total = sum(shares.values())
    return sum((s / total * 100.0) ** 2 for s in shares.values())


def hhi_from_shares(shares: Iterable[float]) -> float:
    shares = list(shares)
    total = sum(shares)
    return sum((s / total * 100.0) ** 2 for s in shares)


def gini_sorted(values: Iterable[float]) -> float | None:
    x = sorted(values)
    n = len(x)
    total = sum(x)
    if n == 0 or total == 0:
        return None
    return sum((2 * i - n - 1) * xi for i, xi in enumerate(x, start=1)) / (n * total)


def centrality_gini(graph: Graph) -> float | None:
    """Gini coefficient of weighted degrees; None when the graph has no edge weight."""
    if graph.n_nodes == 0:
        raise ValueError("graph has no nodes")
    return gini_sorted(graph.weighted_degrees())


def count_components(graph: Graph) -> int:
    parent = list(range(graph.n_nodes))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    count = graph.n_nodes
    for e in graph.edges:
        ru, rv = find(e.u), find(e.v)
        if ru != rv:
            parent[ru] = rv
            count -= 1
    return count


def connected_component_density(graph: Graph) -> float:
    if graph.n_nodes == 0:
        raise ValueError("graph has no nodes")
    return 1.0 - count_components(graph) / graph.n_nodes


def _is_connected(adj: dict[int, set[int]]) -> bool:
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for u in adj[stack.pop()]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(adj)


def local_vertex_connectivity(adj: dict[int, set[int]], s: int, t: int) -> int:
    """Maximum number of internally vertex-disjoint s-t paths (s, t non-adjacent).

    Each vertex v other than s, t becomes an in/out pair joined by a unit
    arc; augmenting paths are found by BFS on the residual graph.
    """
    nodes = sorted(adj)
    idx = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    big = n + 1
    # node i -> in = 2i, out = 2i + 1
    cap: dict[tuple[int, int], int] = {}
    out: list[list[int]] = [[] for _ in range(2 * n)]

    def arc(a: int, b: int, c: int) -> None:
        if (a, b) not in cap:
            out[a].append(b)
            out[b].append(a)
            cap[(a, b)] = 0
            cap.setdefault((b, a), 0)
        cap[(a, b)] += c

    for v in nodes:
        i = idx[v]
        arc(2 * i, 2 * i + 1, big if v in (s, t) else 1)
        for u in adj[v]:
            arc(2 * i + 1, 2 * idx[u], big)

    source, sink = 2 * idx[s] + 1, 2 * idx[t]
    flow = 0
    while True:
        prev = {source: source}
        queue = deque([source])
        while queue and sink not in prev:
            a = queue.popleft()
            for b in out[a]:
                if b not in prev and cap[(a, b)] > 0:
                    prev[b] = a
                    queue.append(b)
        if sink not in prev:
            return flow
        b = sink
        while b != source:
            a = prev[b]
            cap[(a, b)] -= 1
            cap[(b, a)] += 1
            b = a
        flow += 1


def vertex_connectivity(adj: dict[int, set[int]]) -> int:
    """Unweighted vertex connectivity of a connected graph given as adjacency sets.

    One vertex gives 0 and a complete graph n - 1. Otherwise the minimum
    local connectivity over non-adjacent pairs, scanning sources in order
    and stopping once the source index exceeds the best value found (some
    vertex among the first kappa + 1 lies outside a minimum cut).
    """
    n = len(adj)
    if n == 0:
        raise ValueError("empty graph")
    if not _is_connected(adj):
        raise ValueError("vertex connectivity requested for a disconnected community")
    if n == 1:
        return 0
    nodes = sorted(adj)
    best = n - 1
    i = 0
    while i <= best and i < n:
        s = nodes[i]
        for t in nodes[i + 1:]:
            if t not in adj[s]:
                best = min(best, local_vertex_connectivity(adj, s, t))
        i += 1
    return best


def average_community_connectivity(
    graph: Graph, partition: Partition | Sequence[int], normalized: bool = False
) -> float:
    """Sum over communities of vertex connectivity / community size.

    Singletons contribute 0. With ``normalized`` the sum is divided by the
    number of communities.
    """
    assignment = _assignment(partition)
    groups: dict[int, list[int]] = {}
    for v, c in enumerate(assignment):
        groups.setdefault(c, []).append(v)
    total = 0.0
    for c in sorted(groups):
        members = groups[c]
        if len(members) < 2:
            continue
        total += vertex_connectivity(graph.subgraph_adjacency(members)) / len(members)
    if normalized:
        return total / len(groups) if groups else 0.0
    return total


def indicator_row(graph: KinGraph, partition: Partition | Sequence[int], normalized_acc: bool = False) -> IndicatorRow:
    assignment = _assignment(partition)
    return IndicatorRow(
        province=graph.province,
        year=graph.year,
        hhi=political_hhi(graph, assignment),
        cgc=centrality_gini(graph),
        ccd=connected_component_density(graph),
        acc=average_community_connectivity(graph, assignment, normalized_acc),
        n_nodes=graph.n_nodes,
        n_edges=len(graph.edges),
        n_communities=len(set(assignment)),
        n_components=count_components(graph),
    )


def graph_partition(records: Sequence[ElectionRecord]) -> tuple[KinGraph, Partition]:
    """Build the graph for one province-year and recover its stored communities."""
    for r in records:
        if r.community_id is None:
            raise ValueError(f"record {r.label} ({r.province} {r.year}) has no community assigned")
    graph = build_graph(records)
    return graph, partition_from_labels(graph, [r.community_id for r in graph.records])


def compute_all(records: Iterable[ElectionRecord], normalized_acc: bool = False) -> list[IndicatorRow]:
    """One indicator row per (province, year), ordered by province then year."""
    rows = []
    for (province, year), group in group_by_province_year(records).items():
        if not group:
            log.info("no records for %s %d; skipped", province, year)
            continue
        graph, part = graph_partition(group)
        rows.append(indicator_row(graph, part, normalized_acc))
    return rows


METRICS = ("hhi", "cgc", "ccd", "acc")


def rank_table(rows: Sequence[IndicatorRow], metric: str) -> list[dict]:
    """Per-year descending ranks of one metric; undefined values are left unranked."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric}")
    out = []
    for year in sorted({r.year for r in rows}):
        cur = [r for r in rows if r.year == year]
        valued = sorted(
            (r for r in cur if getattr(r, metric) is not None and not math.isnan(getattr(r, metric))),
            key=lambda r: (-getattr(r, metric), r.province),
        )
        for rank, r in enumerate(valued, start=1):
            out.append({"year": year, "rank": rank, "province": r.province, metric: getattr(r, metric)})
        for r in sorted(set(cur) - set(valued), key=lambda r: r.province):
            out.append({"year": year, "rank": None, "province": r.province, metric: None})
    return out
