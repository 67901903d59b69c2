from __future__ import annotations

import itertools
import math
import random

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from conftest import rec
from oracles import components_bfs, gini_mean_abs_diff, vertex_connectivity_exhaustive
from kinnet.community import leiden
from kinnet.graph import Graph, build_graph
from kinnet.indicators import (
    IndicatorRow,
    average_community_connectivity,
    centrality_gini,
    compute_all,
    connected_component_density,
    count_components,
    gini_sorted,
    hhi_from_shares,
    indicator_row,
    political_hhi,
    rank_table,
    vertex_connectivity,
)
from kinnet.records import Position


def adj_of(n: int, edges) -> dict[int, set[int]]:
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def test_hhi_worked_examples():
    assert hhi_from_shares([5, 3, 2]) == pytest.approx(3800, abs=1e-9)
    assert hhi_from_shares([8, 2]) == pytest.approx(6800, abs=1e-9)
    g = Graph.from_edges(3, [], node_weights=[5, 3, 2])
    assert political_hhi(g, [0, 1, 2]) == pytest.approx(3800, abs=1e-9)
    assert political_hhi(g, [0, 0, 0]) == pytest.approx(10000)


def test_hhi_errors():
    with pytest.raises(ValueError):
        political_hhi(Graph.from_edges(0, []), [])
    with pytest.raises(ValueError):
        political_hhi(Graph.from_edges(2, []), [0])


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=12))
def test_hhi_bounds(shares):
    h = hhi_from_shares(shares)
    assert 10000 / len(shares) - 1e-6 <= h <= 10000 + 1e-6


def test_gini_examples():
    assert gini_sorted([0, 0, 0, 10]) == pytest.approx(0.75)
    assert gini_sorted([4, 4, 4]) == 0
    assert centrality_gini(Graph.from_edges(3, [])) is None


@given(st.lists(st.floats(0, 1000), min_size=1, max_size=15))
def test_gini_matches_mean_abs_diff(values):
    g, oracle = gini_sorted(values), gini_mean_abs_diff(values)
    if oracle is None:
        assert g is None
    else:
        assert g == pytest.approx(oracle, abs=1e-12)
        assert 0 <= g <= 1 - 1 / len(values) + 1e-12


def test_ccd_examples():
    assert connected_component_density(Graph.from_edges(5, [])) == 0
    path = Graph.from_edges(5, [(i, i + 1) for i in range(4)])
    assert connected_component_density(path) == pytest.approx(1 - 1 / 5)
    g = Graph.from_edges(10, [(0, 1), (1, 2), (3, 4), (5, 6), (6, 7), (7, 8), (8, 9)])
    assert count_components(g) == 3
    g10 = Graph.from_edges(10, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (7, 8)])
    assert connected_component_density(g10) == pytest.approx(0.6)


@pytest.mark.parametrize(
    "n, edges, kappa",
    [
        (4, list(itertools.combinations(range(4), 2)), 3),
        (5, [(i, i + 1) for i in range(4)], 1),
        (4, [(0, 1), (1, 2), (2, 3), (3, 0)], 2),
        (1, [], 0),
        (2, [(0, 1)], 1),
        (5, [(0, i) for i in range(1, 5)], 1),
    ],
)
def test_vertex_connectivity_examples(n, edges, kappa):
    assert vertex_connectivity(adj_of(n, edges)) == kappa


def test_vertex_connectivity_disconnected_raises():
    with pytest.raises(ValueError):
        vertex_connectivity(adj_of(4, [(0, 1), (2, 3)]))


@pytest.mark.parametrize("seed", range(40))
def test_vertex_connectivity_vs_oracles(seed):
    r = random.Random(seed)
    n = r.randint(2, 9)
    g = nx.gnp_random_graph(n, r.uniform(0.3, 0.9), seed=seed)
    if not nx.is_connected(g):
        g = nx.compose(g, nx.path_graph(n))
    adj = {v: set(g[v]) for v in g}
    k = vertex_connectivity(adj)
    assert k == vertex_connectivity_exhaustive(adj)
    assert k == nx.node_connectivity(g)


def test_acc_examples():
    k4 = list(itertools.combinations(range(4), 2))
    p5 = [(4 + i, 5 + i) for i in range(4)]
    g = Graph.from_edges(9, k4 + p5)
    assert average_community_connectivity(g, [0] * 4 + [1] * 5) == pytest.approx(0.95)
    assert average_community_connectivity(g, [0] * 4 + [1] * 5, normalized=True) == pytest.approx(0.475)
    assert average_community_connectivity(Graph.from_edges(4, k4), [0] * 4) == pytest.approx(0.75)
    assert average_community_connectivity(g, list(range(9))) == 0


def fixture_records():
    return [
        rec("CRUZ", "JUAN", "SANTOS", Position.GOVERNOR, "LP"),
        rec("CRUZ", "MARK", "SANTOS", Position.VICE_MAYOR, "LP"),
        rec("CRUZ", "ANA", "REYES", Position.COUNCILOR, "LP"),
        rec("LIM", "KIM", None, Position.MAYOR, "NP"),
        rec("TAN", "BEN", None, Position.COUNCILOR, "NP"),
    ]


def test_indicator_row_hand_values():
    g = build_graph(fixture_records())
    # nodes sorted: CRUZ ANA (2), CRUZ JUAN (5), CRUZ MARK (3), LIM (5), TAN (2)
    part = [0, 0, 0, 1, 2]
    row = indicator_row(g, part)
    # edges: ANA-JUAN 2*5*.75=7.5, ANA-MARK 2*3*.75=4.5, JUAN-MARK 15
    assert sorted(e.weight for e in g.edges) == [4.5, 7.5, 15.0]
    assert row.hhi == pytest.approx((10 / 17 * 100) ** 2 + (5 / 17 * 100) ** 2 + (2 / 17 * 100) ** 2)
    assert row.cgc == pytest.approx(gini_mean_abs_diff([12, 22.5, 19.5, 0, 0]))
    assert row.ccd == pytest.approx(1 - 3 / 5)
    assert row.acc == pytest.approx(2 / 3)
    assert (row.n_nodes, row.n_edges, row.n_communities, row.n_components) == (5, 3, 3, 3)


def test_compute_all_rows_and_order():
    records = []
    for prov in ("B", "A"):
        for year in (2016, 2013):
            records += [rec(r.last_name, r.first_name, r.middle_name, r.position, r.party, province=prov, year=year,
                            community_id=i) for i, r in enumerate(fixture_records())]
    rows = compute_all(records)
    assert [(r.province, r.year) for r in rows] == [("A", 2013), ("A", 2016), ("B", 2013), ("B", 2016)]


def test_compute_all_requires_communities():
    with pytest.raises(ValueError, match="community"):
        compute_all(fixture_records())


@pytest.mark.parametrize("seed", range(25))
def test_random_graph_indicator_oracles(seed):
    r = random.Random(seed)
    n = r.randint(1, 10)
    pairs = [(u, v, r.choice([1.0, 4.5, 15.0])) for u, v in itertools.combinations(range(n), 2) if r.random() < 0.3]
    g = Graph.from_edges(n, pairs, node_weights=[r.choice([2, 3, 5]) for _ in range(n)])
    part = leiden(g, seed=seed)
    assert count_components(g) == components_bfs(n, adj_of(n, [(u, v) for u, v, _ in pairs]))
    expected_acc = sum(vertex_connectivity_exhaustive(g.subgraph_adjacency(c)) / len(c)
                       for c in part.communities() if len(c) > 1)
    assert average_community_connectivity(g, part) == pytest.approx(expected_acc, abs=1e-12)


def test_rank_table():
    rows = [
        IndicatorRow("A", 2016, 100.0, 0.5, 0.1, 1.0, 5, 2, 3, 3),
        IndicatorRow("B", 2016, 300.0, None, 0.3, 1.0, 5, 0, 5, 5),
        IndicatorRow("C", 2016, 200.0, 0.2, 0.2, 1.0, 5, 2, 3, 3),
    ]
    assert [(t["province"], t["rank"]) for t in rank_table(rows, "hhi")] == [("B", 1), ("C", 2), ("A", 3)]
    assert [(t["province"], t["rank"]) for t in rank_table(rows, "cgc")] == [("A", 1), ("C", 2), ("B", None)]
    with pytest.raises(ValueError):
        rank_table(rows, "bogus")
    assert not math.isnan(rows[0].hhi)
