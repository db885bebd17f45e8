import math
from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iabsim.channel import ChannelState
from iabsim.errors import ConfigError, RoutingError
from iabsim.model import BACKHAUL, IabNode, Link, Position, SimConfig, Ue, validate_topology
from iabsim.routing import attach_ues, build_backhaul_topology, candidate_graph, select_next_hop
from iabsim.scenario import Site, build_topology


def _nodes(xy, donors=(0,)):
    return [IabNode(i, Position(float(x), float(y), 10.0), i in donors) for i, (x, y) in enumerate(xy)]


def _channel(nodes, ues=(), seed=0):
    return ChannelState(nodes, list(ues), SimConfig(), np.random.default_rng(seed))


def test_single_node_in_range():
    nodes = _nodes([(0, 0), (100, 0)])
    plan = build_backhaul_topology(nodes, _channel(nodes))
    assert [(lk.from_id, lk.to_id) for lk in plan.equipped] == [(1, 0)]


@pytest.mark.parametrize("criterion", ["min_hop", "max_sinr"])
def test_forced_chain(criterion):
    nodes = _nodes([(0, 0), (300, 0), (600, 0)])
    plan = build_backhaul_topology(nodes, _channel(nodes), criterion, max_range_m=400)
    assert sorted((lk.from_id, lk.to_id) for lk in plan.equipped) == [(1, 0), (2, 1)]
    assert plan.hops == {0: 0, 1: 1, 2: 2}


def test_unreachable_node():
    nodes = _nodes([(0, 0), (100, 0), (5000, 0)])
    with pytest.raises(RoutingError, match="unreachable node: 2"):
        build_backhaul_topology(nodes, _channel(nodes))


def test_unknown_criterion():
    nodes = _nodes([(0, 0)])
    with pytest.raises(ConfigError, match="valid ids"):
        build_backhaul_topology(nodes, _channel(nodes), "shortest")


def _oracle_hops(nodes, max_range):
    g = nx.Graph()
    g.add_nodes_from(n.iab_id for n in nodes)
    for a in nodes:
        for b in nodes:
            if a.iab_id < b.iab_id and math.dist((a.location.x, a.location.y),
                                                  (b.location.x, b.location.y)) <= max_range:
                g.add_edge(a.iab_id, b.iab_id)
    donors = [n.iab_id for n in nodes if n.is_donor]
    return g, nx.multi_source_dijkstra_path_length(g, donors)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 10), st.sampled_from([1, 2]))
def test_tree_hops_equal_bfs(seed, n, n_donors):
    rng = np.random.default_rng(seed)
    nodes = _nodes(rng.random((n, 2)) * 600, donors=range(n_donors))
    g, oracle = _oracle_hops(nodes, 250.0)
    ch = _channel(nodes, seed=seed)
    if len(oracle) < n:
        with pytest.raises(RoutingError):
            build_backhaul_topology(nodes, ch, max_range_m=250.0)
        return
    plan = build_backhaul_topology(nodes, ch, max_range_m=250.0)
    assert plan.hops == oracle
    for lk in plan.equipped:
        assert g.has_edge(lk.from_id, lk.to_id)
        assert plan.hops[lk.to_id] == plan.hops[lk.from_id] - 1


def test_max_parents_gives_multi_parent_dag():
    nodes = _nodes([(0, 0), (400, 0), (200, 100), (200, -100), (300, 300)], donors=(0, 1))
    plan = build_backhaul_topology(nodes, _channel(nodes), max_parents=2, max_range_m=260)
    assert plan.parents[2] == [0, 1] and plan.parents[3] == [0, 1]


def test_attach_ues_best_sinr():
    nodes = _nodes([(0, 0), (200, 0)])
    ues = [Ue(0, Position(5, 0, 1.5), -1), Ue(1, Position(195, 0, 1.5), -1)]
    ch = _channel(nodes, ues)
    out, links = attach_ues(ues, nodes, ch)
    for u, lk in zip(out, links):
        best = max((ch.ue_node_sinr_db(u.ue_id, n.iab_id), -n.iab_id) for n in nodes)
        assert u.serving_cell == -best[1] == lk.to_id
    one, _ = attach_ues(ues, nodes[:1], _channel(nodes[:1], ues))
    assert all(u.serving_cell == 0 for u in one)


def _link(a, b, s):
    return Link(f"bh-{a}-{b}", a, b, BACKHAUL, sinr_db=s)


def test_next_hop_policies():
    parents = [_link(5, 1, 10.0), _link(5, 2, 20.0)]
    hops = {1: 1, 2: 2}
    assert select_next_hop(5, None, parents, "min_hop", hops).to_id == 1
    assert select_next_hop(5, None, parents, "max_sinr", hops).to_id == 2
    for pol in ("min_hop", "max_sinr", "random"):
        assert select_next_hop(5, None, parents[:1], pol, hops, np.random.default_rng(0)).to_id == 1
    with pytest.raises(RoutingError, match="no route from node 5"):
        select_next_hop(5, None, [], "min_hop", hops)
    with pytest.raises(ConfigError, match="valid ids"):
        select_next_hop(5, None, parents, "widest", hops)


def test_min_hop_tie_goes_to_sinr():
    parents = [_link(5, 1, 10.0), _link(5, 2, 20.0)]
    assert select_next_hop(5, None, parents, "min_hop", {1: 1, 2: 1}).to_id == 2


def test_random_policy_is_balanced_and_seeded():
    parents = [_link(5, 1, 10.0), _link(5, 2, 20.0)]
    rng = np.random.default_rng(42)
    picks = Counter(select_next_hop(5, None, parents, "random", {}, rng).to_id for _ in range(10_000))
    assert abs(picks[1] - 5000) <= 300
    a = [select_next_hop(5, None, parents, "random", {}, np.random.default_rng(3)).to_id for _ in range(5)]
    b = [select_next_hop(5, None, parents, "random", {}, np.random.default_rng(3)).to_id for _ in range(5)]
    assert a == b


def test_built_topology_is_valid():
    sites = [Site(i, 150.0 * (i % 3), 150.0 * (i // 3), 10.0, i == 0) for i in range(9)]
    ues = [Position(20.0 * k, 17.0 * k, 1.5) for k in range(12)]
    topo, _ = build_topology(sites, ues, SimConfig(), np.random.default_rng(1))
    assert validate_topology(topo) == []
    assert all(not math.isnan(lk.sinr_db) for lk in topo.links)
    assert len(topo.equipped_backhaul) == 8


def test_candidate_graph_is_range_limited():
    nodes = _nodes([(0, 0), (499, 0), (999, 0)])
    assert candidate_graph(nodes, 500) == {0: [1], 1: [0, 2], 2: [1]}
