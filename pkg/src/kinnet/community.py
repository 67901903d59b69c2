"""Modularity and Leiden community detection on weighted graphs."""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .graph import Graph

log = logging.getLogger(__name__)

TOLERANCE = 1e-10
MAX_ITERATIONS = 100


@dataclass(frozen=True)
class Partition:
    assignment: tuple[int, ...]
    num_communities: int
    modularity: float

    def communities(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.num_communities)]
        for v, c in enumerate(self.assignment):
            groups[c].append(v)
        return groups


def _as_assignment(partition: Partition | Sequence[int]) -> Sequence[int]:
    return partition.assignment if isinstance(partition, Partition) else partition


def modularity(graph: Graph, partition: Partition | Sequence[int], gamma: float = 1.0, weighted: bool = True) -> float:
    """H = (1/2m) * sum_c (e_c - gamma * K_c^2 / 2m).

    m is the total edge weight, e_c twice the intra-community edge weight and
    K_c the summed weighted degree of community c. A graph without edge
    weight has modularity 0.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    assignment = _as_assignment(partition)
    if len(assignment) != graph.n_nodes:
        raise ValueError("partition does not cover every node")
    two_m = 0.0
    internal: dict[int, float] = {}
    degree: dict[int, float] = {}
    for e in graph.edges:
        w = e.weight if weighted else 1.0
        two_m += 2 * w
        cu, cv = assignment[e.u], assignment[e.v]
        degree[cu] = degree.get(cu, 0.0) + w
        degree[cv] = degree.get(cv, 0.0) + w
        if cu == cv:
            internal[cu] = internal.get(cu, 0.0) + 2 * w
    if two_m == 0:
        log.info("modularity of a graph with zero edge weight defined as 0")
        return 0.0
    return sum(internal.get(c, 0.0) - gamma * k * k / two_m for c, k in degree.items()) / two_m


class _Level:
    """Graph at one aggregation level: adjacency without self-loops, plus self-loop weights."""

    def __init__(self, adj: list[dict[int, float]], loops: list[float]):
        self.adj = adj
        self.loops = loops
        self.n = len(adj)
        self.k = [sum(a.values()) + 2 * s for a, s in zip(adj, loops)]

    @classmethod
    def from_graph(cls, graph: Graph, weighted: bool) -> _Level:
        adj = graph.adjacency(weighted)
        return cls(adj, [0.0] * graph.n_nodes)

    def aggregate(self, groups: list[int], n_groups: int) -> _Level:
        adj: list[dict[int, float]] = [dict() for _ in range(n_groups)]
        loops = [0.0] * n_groups
        for v in range(self.n):
            gv = groups[v]
            loops[gv] += self.loops[v]
            for u, w in self.adj[v].items():
                gu = groups[u]
                if gu == gv:
                    if u > v:
                        loops[gv] += w
                else:
                    adj[gv][gu] = adj[gv].get(gu, 0.0) + w
        return _Level(adj, loops)


def _renumber(labels: Sequence[int]) -> tuple[list[int], int]:
    seen: dict[int, int] = {}
    out = []
    for c in labels:
        if c not in seen:
            seen[c] = len(seen)
        out.append(seen[c])
    return out, len(seen)


def _move_nodes_fast(level: _Level, part: list[int], gamma: float, two_m: float, rng: random.Random) -> list[int]:
    n = level.n
    part = list(part)
    tot = [0.0] * n
    size = [0] * n
    for v in range(n):
        tot[part[v]] += level.k[v]
        size[part[v]] += 1
    empty = [c for c in range(n - 1, -1, -1) if size[c] == 0]

    order = list(range(n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * n
    eps = 1e-13 * two_m
    while queue:
        v = queue.popleft()
        queued[v] = False
        kv = level.k[v]
        old = part[v]
        links: dict[int, float] = {}
        for u, w in level.adj[v].items():
            links[part[u]] = links.get(part[u], 0.0) + w
        tot[old] -= kv
        size[old] -= 1
        if size[old] == 0:
            empty.append(old)

        best = old
        best_gain = links.get(old, 0.0) - gamma * kv * tot[old] / two_m
        for c, w in links.items():
            gain = w - gamma * kv * tot[c] / two_m
            if gain > best_gain + eps:
                best, best_gain = c, gain
        if 0.0 > best_gain + eps:
            best = empty[-1]

        if size[best] == 0:
            empty.remove(best)
        tot[best] += kv
        size[best] += 1
        part[v] = best
        if best != old:
            for u in level.adj[v]:
                if part[u] != best and not queued[u]:
                    queue.append(u)
                    queued[u] = True
    return part


def _refine(level: _Level, part: list[int], gamma: float, two_m: float, rng: random.Random) -> list[int]:
    """Split each community into well-connected sub-communities, merging singletons only."""
    n = level.n
    refined = list(range(n))
    tot = list(level.k)
    singleton = [True] * n
    members: dict[int, list[int]] = {}
    for v in range(n):
        members.setdefault(part[v], []).append(v)

    for c in sorted(members):
        nodes = members[c]
        k_c = sum(level.k[v] for v in nodes)
        # weight from each refined community to the rest of its parent community
        ext = {v: sum(w for u, w in level.adj[v].items() if part[u] == c) for v in nodes}
        order = list(nodes)
        rng.shuffle(order)
        for v in order:
            if not singleton[v]:
                continue
            kv = level.k[v]
            if ext[v] < gamma * kv * (k_c - kv) / two_m:
                continue
            links: dict[int, float] = {}
            for u, w in level.adj[v].items():
                if part[u] == c:
                    links[refined[u]] = links.get(refined[u], 0.0) + w
            candidates = []
            for t, w in links.items():
                if t == refined[v]:
                    continue
                if ext[t] < gamma * tot[t] * (k_c - tot[t]) / two_m:
                    continue
                if w - gamma * kv * tot[t] / two_m > 0:
                    candidates.append(t)
            if not candidates:
                continue
            t = candidates[rng.randrange(len(candidates))]
            w_vt = links[t]
            own = refined[v]
            tot[own] -= kv
            tot[t] += kv
            ext[t] = ext[t] + ext[own] - 2 * w_vt
            refined[v] = t
            singleton[v] = False
            singleton[t] = False  # community t always contains node t
    return refined


def _leiden_pass(base: _Level, init: list[int], gamma: float, two_m: float, rng: random.Random) -> list[int]:
    level = base
    part = list(init)
    mapping = list(range(base.n))  # base node -> level node
    while True:
        part = _move_nodes_fast(level, part, gamma, two_m, rng)
        part, n_comm = _renumber(part)
        if n_comm == level.n:
            break
        refined, n_ref = _renumber(_refine(level, part, gamma, two_m, rng))
        if n_ref == level.n:
            # refinement merged nothing; aggregate on the communities themselves
            refined, n_ref = part, n_comm
        agg_part = [0] * n_ref
        for v in range(level.n):
            agg_part[refined[v]] = part[v]
        mapping = [refined[m] for m in mapping]
        level = level.aggregate(refined, n_ref)
        part = agg_part
    return [part[m] for m in mapping]


def _connected_labels(adj: list[dict[int, float]], assignment: Sequence[int]) -> tuple[list[int], int]:
    out = [-1] * len(assignment)
    label = 0
    for s in range(len(assignment)):
        if out[s] != -1:
            continue
        out[s] = label
        stack = [s]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if out[u] == -1 and assignment[u] == assignment[v]:
                    out[u] = label
                    stack.append(u)
        label += 1
    return out, label


def _split_disconnected(adj: list[dict[int, float]], assignment: list[int]) -> list[int]:
    """Relabel so every community is connected (a split never lowers modularity)."""
    out, n_after = _connected_labels(adj, assignment)
    n_before = len(set(assignment))
    if n_after != n_before:
        log.warning("split %d disconnected communities", n_after - n_before)
    return out


def _order_by_weight(assignment: list[int], node_weights: Sequence[float]) -> tuple[list[int], int]:
    totals: dict[int, float] = {}
    first: dict[int, int] = {}
    for v, c in enumerate(assignment):
        totals[c] = totals.get(c, 0.0) + node_weights[v]
        first.setdefault(c, v)
    ranked = sorted(totals, key=lambda c: (-totals[c], first[c]))
    new_id = {c: i for i, c in enumerate(ranked)}
    return [new_id[c] for c in assignment], len(ranked)


def leiden(
    graph: Graph,
    gamma: float = 1.0,
    seed: int = 0,
    weighted: bool = True,
    initial: Sequence[int] | None = None,
    max_iterations: int = MAX_ITERATIONS,
) -> Partition:
    """Leiden modularity optimization.

    Passes of (fast local moving, refinement, aggregation) are repeated from
    the previous result until modularity improves by no more than 1e-10.
    Community ids are ordered by descending total node weight.
    """
    if graph.n_nodes == 0:
        raise ValueError("graph has no nodes")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    base = _Level.from_graph(graph, weighted)
    two_m = sum(base.k)
    if two_m == 0:
        assignment = list(range(graph.n_nodes))
    else:
        rng = random.Random(seed)
        assignment = list(initial) if initial is not None else list(range(graph.n_nodes))
        assignment, _ = _renumber(assignment)
        quality = modularity(graph, assignment, gamma, weighted)
        for _ in range(max_iterations):
            candidate = _leiden_pass(base, assignment, gamma, two_m, rng)
            q = modularity(graph, candidate, gamma, weighted)
            improved = q - quality > TOLERANCE
            if q >= quality:
                assignment, quality = candidate, q
            if not improved:
                break
        assignment = _split_disconnected(base.adj, assignment)
    assignment, k = _order_by_weight(assignment, graph.node_weights)
    return Partition(tuple(assignment), k, modularity(graph, assignment, gamma, weighted))


def partition_from_labels(graph: Graph, labels: Sequence[int], gamma: float = 1.0, weighted: bool = True) -> Partition:
    assignment, k = _renumber(labels)
    return Partition(tuple(assignment), k, modularity(graph, assignment, gamma, weighted))


def communities_connected(graph: Graph, partition: Partition | Sequence[int]) -> bool:
    assignment = list(_as_assignment(partition))
    _, n_after = _connected_labels(graph.adjacency(), assignment)
    return n_after == len(set(assignment))
