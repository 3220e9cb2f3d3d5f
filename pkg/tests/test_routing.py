import math
import time

import numpy as np
import pytest

from oracles import bellman_ford, enumerate_min_arborescence
from satagg._kernels import IMPLEMENTATION
from satagg._kernels import pure as pure_kernel
from satagg.routing import (
    OracleSizeLimitError,
    RoutingInfeasibleError,
    build_substitute_graph,
    chu_liu_edmonds,
    d_merge,
    dijkstra,
    exact_dst_oracle,
    orbit_greedy,
    select_root,
    shortest_paths_to_root,
    taeer,
    tree_to_json,
)
from satagg.topology import SnapshotGraph

from conftest import random_digraph


def graph_of(n, edges, frames=1):
    return SnapshotGraph.from_edge_list(n, edges, frame_count=frames)


def reaches_root(n, edges, root):
    """Nodes that can reach root following directed edges (test-side BFS)."""
    radj = {}
    for u, v, _ in edges:
        radj.setdefault(v, []).append(u)
    seen = {root}
    stack = [root]
    while stack:
        x = stack.pop()
        for y in radj.get(x, ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


class TestDijkstra:
    def test_source_equals_target(self):
        g = graph_of(3, [(0, 1, 1.0)])
        p = dijkstra(g, 0, 0, 0)
        assert p.nodes == (0,) and p.cost == 0.0 and p.edge_ids == ()

    def test_single_edge(self):
        g = graph_of(2, [(0, 1, 2.5)])
        p = dijkstra(g, 0, 0, 1)
        assert p.nodes == (0, 1) and p.cost == 2.5

    def test_unreachable_returns_none(self):
        g = graph_of(3, [(0, 1, 1.0)])
        assert dijkstra(g, 0, 2, 0) is None

    def test_against_bellman_ford_ensemble(self):
        rng = np.random.default_rng(40)
        for _ in range(1000):
            n, edges = random_digraph(rng, max_nodes=12)
            if not edges:
                continue
            g = graph_of(n, edges)
            src = int(rng.integers(n))
            dist = bellman_ford(n, edges, src)
            for dst in range(n):
                p = dijkstra(g, 0, src, dst)
                if math.isinf(dist[dst]):
                    assert p is None
                else:
                    assert p.cost == dist[dst]  # exact float equality

    def test_path_follows_graph_edges(self):
        rng = np.random.default_rng(41)
        n, edges = random_digraph(rng, max_nodes=10, p=0.5)
        g = graph_of(n, edges)
        p = dijkstra(g, 0, 0, n - 1)
        if p is not None:
            for a, b, e in zip(p.nodes, p.nodes[1:], p.edge_ids):
                assert (g.src[e], g.dst[e]) == (a, b)
            assert p.cost == pytest.approx(
                sum(g.weights_j[0][e] for e in p.edge_ids), rel=1e-12)

    @pytest.mark.skipif(IMPLEMENTATION != "compiled",
                        reason="compiled kernel not built")
    def test_compiled_and_pure_kernels_identical(self):
        rng = np.random.default_rng(42)
        from satagg._kernels import _dijkstra as compiled
        for _ in range(200):
            n, edges = random_digraph(rng, max_nodes=30, p=0.25)
            if not edges:
                continue
            g = graph_of(n, edges)
            indptr, indices, w = g.frame_csr(0)
            src = int(rng.integers(n))
            d1, p1 = compiled.shortest_path_csr(indptr, indices, w, src, -1)
            d2, p2 = pure_kernel.shortest_path_csr(indptr, indices, w, src, -1)
            assert np.array_equal(d1, d2)
            assert np.array_equal(p1, p2)


class TestSubstituteGraph:
    def test_single_terminal_is_the_path(self):
        g = graph_of(4, [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 5.0), (2, 3, 5.0)])
        ps = shortest_paths_to_root(g, 0, [0, 3], 3)
        sub = build_substitute_graph(ps)
        assert set(zip(sub.src.tolist(), sub.dst.tolist())) == {(0, 1), (1, 3)}

    def test_disjoint_paths_edge_count(self):
        g = graph_of(5, [(0, 2, 1.0), (2, 4, 1.0), (1, 3, 1.0), (3, 4, 1.0)])
        ps = shortest_paths_to_root(g, 0, [0, 1, 4], 4)
        sub = build_substitute_graph(ps)
        assert sub.num_edges == 4

    def test_shared_suffix_deduplicated(self):
        # Both terminals funnel through 2 -> 3; the shared edge appears once.
        g = graph_of(4, [(0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
        ps = shortest_paths_to_root(g, 0, [0, 1, 3], 3)
        sub = build_substitute_graph(ps)
        expected = {(0, 2), (1, 2), (2, 3)}  # set union oracle
        assert set(zip(sub.src.tolist(), sub.dst.tolist())) == expected

    def test_empty_path_set_root_only(self):
        g = graph_of(3, [(0, 1, 1.0)])
        ps = shortest_paths_to_root(g, 0, [2], 2)
        sub = build_substitute_graph(ps)
        assert sub.num_edges == 0


class TestChuLiuEdmonds:
    def test_simple_instance(self):
        g = graph_of(3, [(1, 0, 1.0), (2, 0, 5.0), (2, 1, 2.0)])
        arb = chu_liu_edmonds(g, 0)
        assert arb.edges == ((1, 0), (2, 1))
        assert arb.total_cost == 3.0
        arb.validate()

    def test_cycle_contraction_instance(self):
        g = graph_of(3, [(1, 0, 10.0), (2, 1, 1.0), (1, 2, 1.0), (2, 0, 10.0)])
        arb = chu_liu_edmonds(g, 0)
        assert arb.edges == ((1, 0), (2, 1))
        assert arb.total_cost == 11.0

    def test_single_node_root(self):
        g = graph_of(1, [])
        arb = chu_liu_edmonds(g, 0)
        assert arb.edges == () and arb.total_cost == 0.0

    def test_stranded_nodes_reported(self):
        g = graph_of(4, [(1, 0, 1.0), (3, 2, 1.0)])
        with pytest.raises(RoutingInfeasibleError) as exc:
            chu_liu_edmonds(g, 0, nodes=range(4))
        assert exc.value.stranded == [2, 3]

    def test_exact_against_enumeration(self):
        rng = np.random.default_rng(77)
        checked = 0
        for _ in range(150):
            n, edges = random_digraph(rng, max_nodes=8, p=0.45)
            if not edges:
                continue
            root = int(rng.integers(n))
            oracle = enumerate_min_arborescence(edges, root, range(n))
            g = graph_of(n, edges)
            try:
                arb = chu_liu_edmonds(g, root, nodes=range(n))
            except RoutingInfeasibleError:
                assert oracle is None
                continue
            arb.validate()
            assert oracle is not None
            assert arb.total_cost == pytest.approx(oracle, rel=1e-12, abs=1e-12)
            checked += 1
        assert checked > 50

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        n, edges = random_digraph(rng, max_nodes=10, p=0.5)
        g = graph_of(n, edges)
        root = 0
        reach = reaches_root(n, edges, root)
        arbs = [chu_liu_edmonds(g, root, nodes=reach) for _ in range(3)]
        assert arbs[0].edges == arbs[1].edges == arbs[2].edges


def random_dst_instance(rng, max_nodes=9, max_terminals=4, integer_weights=False):
    """Digraph + (terminals, root) with every terminal able to reach root.

    integer_weights=True quantises weights to small integers, making
    equal-cost path ties common (they are measure-zero under continuous
    weights, in which case the per-terminal shortest paths always merge
    into a tree and the arborescence step cannot improve on the union).
    """
    while True:
        n, edges = random_digraph(rng, max_nodes=max_nodes, p=0.4, min_nodes=3)
        if not edges:
            continue
        if integer_weights:
            edges = [(u, v, float(rng.integers(1, 5))) for u, v, _ in edges]
        root = int(rng.integers(n))
        reach = sorted(reaches_root(n, edges, root))
        if len(reach) < 2:
            continue
        k = int(rng.integers(1, min(max_terminals, len(reach)) + 1))
        picks = rng.choice(len(reach), size=k, replace=False)
        terminals = sorted({root} | {reach[i] for i in picks})
        return graph_of(n, edges), terminals, root


class TestTaeer:
    def test_root_only(self):
        g = graph_of(3, [(0, 1, 1.0)])
        arb = taeer(g, 0, [1], 1)
        assert arb.edges == () and arb.total_cost == 0.0

    def test_single_terminal_is_shortest_path(self):
        g = graph_of(4, [(0, 1, 1.0), (1, 3, 1.0), (0, 3, 5.0)])
        arb = taeer(g, 0, [0, 3], 3)
        assert arb.edges == ((0, 1), (1, 3))
        assert arb.total_cost == 2.0

    def test_root_must_be_terminal(self):
        g = graph_of(3, [(0, 1, 1.0)])
        with pytest.raises(ValueError):
            taeer(g, 0, [0], 1)

    def test_unreachable_terminal_listed(self):
        g = graph_of(3, [(0, 1, 1.0)])
        with pytest.raises(RoutingInfeasibleError) as exc:
            taeer(g, 0, [1, 2], 1)
        assert exc.value.stranded == [2]

    def test_invariants_and_sandwich_small_ensemble(self):
        rng = np.random.default_rng(99)
        for _ in range(60):
            g, terminals, root = random_dst_instance(rng)
            arb = taeer(g, 0, terminals, root)
            arb.validate(terminals)
            merged = d_merge(g, 0, terminals, root)
            opt = exact_dst_oracle(g, terminals, root)
            assert opt <= arb.total_cost + 1e-9
            assert arb.total_cost <= merged.total_cost + 1e-9

    def test_sandwich_holds_under_weight_ties(self):
        rng = np.random.default_rng(98)
        for _ in range(200):
            g, terminals, root = random_dst_instance(rng, integer_weights=True)
            arb = taeer(g, 0, terminals, root)
            arb.validate(terminals)
            merged = d_merge(g, 0, terminals, root)
            opt = exact_dst_oracle(g, terminals, root)
            assert opt <= arb.total_cost + 1e-9
            assert arb.total_cost <= merged.total_cost + 1e-9

    def test_coincides_with_merging_when_paths_unique(self):
        # With node-id tie-breaking, per-terminal shortest paths into a
        # common root always share suffixes, so their union is already an
        # arborescence: the exact solver cannot improve on it and both
        # algorithms return the same edge set (bit-identical cost).
        rng = np.random.default_rng(97)
        for _ in range(100):
            g, terminals, root = random_dst_instance(rng)
            arb = taeer(g, 0, terminals, root)
            merged = d_merge(g, 0, terminals, root)
            assert arb.edges == merged.edges
            assert arb.total_cost == merged.total_cost

    def test_deterministic(self):
        rng = np.random.default_rng(123)
        g, terminals, root = random_dst_instance(rng)
        a = taeer(g, 0, terminals, root)
        b = taeer(g, 0, terminals, root)
        assert a.edges == b.edges and a.total_cost == b.total_cost


class TestDMerge:
    def test_single_terminal_matches_taeer(self):
        g = graph_of(4, [(0, 1, 1.0), (1, 3, 1.0), (0, 3, 5.0)])
        assert d_merge(g, 0, [0, 3], 3).total_cost == taeer(g, 0, [0, 3], 3).total_cost

    def test_disjoint_paths_costs_add(self):
        g = graph_of(5, [(0, 2, 1.5), (2, 4, 1.0), (1, 3, 2.0), (3, 4, 1.0)])
        m = d_merge(g, 0, [0, 1, 4], 4)
        assert m.total_cost == pytest.approx(5.5)

    def test_dominance_over_taeer_ensemble(self):
        # The arborescence keeps at most one outgoing edge per substitute
        # node, so it can never cost more than the merged path union.
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            g, terminals, root = random_dst_instance(rng, max_nodes=10)
            assert taeer(g, 0, terminals, root).total_cost <= \
                d_merge(g, 0, terminals, root).total_cost + 1e-9


class TestOrbitGreedy:
    @pytest.fixture
    def snapshot(self, delta_spec, params):
        import numpy as np

        from satagg import topology
        times = topology.TimeStructure.for_constellation(delta_spec)
        txp = topology.tx_power_draw(delta_spec, np.random.default_rng(0))
        return topology.build_snapshot(delta_spec, params, times, 0.0, txp)

    def test_adjacent_terminals_one_orbit(self, snapshot):
        res = orbit_greedy(snapshot, 0, [3, 4, 5], np.random.default_rng(1))
        assert len(res.orbit_roots) == 1
        assert len(res.edges) == 2  # arc spans exactly the terminal range
        assert len(res.uplink_nodes) == 1

    def test_three_orbits_three_uplinks(self, snapshot):
        terminals = [2, 25, 47]  # orbits 0, 1, 2
        res = orbit_greedy(snapshot, 0, terminals, np.random.default_rng(1))
        assert len(res.uplink_nodes) == 3
        assert {o for o, _ in res.orbit_roots} == {0, 1, 2}

    def test_wraparound_arc(self, snapshot):
        # Slots 18, 19, 0, 1 of orbit 0: the minimal arc crosses the seam.
        res = orbit_greedy(snapshot, 0, [18, 19, 0, 1], np.random.default_rng(3))
        assert len(res.edges) == 3
        children = {c for c, _ in res.edges} | {p for _, p in res.edges}
        assert children == {18, 19, 0, 1}

    def test_cost_includes_uplinks(self, snapshot):
        res = orbit_greedy(snapshot, 0, [2, 25], np.random.default_rng(1))
        ring = sum(snapshot.weights_j[0][e] for e in res.edge_ids)
        ups = sum(snapshot.weights_j[0][snapshot.edge_index[(r, snapshot.geo_node)]]
                  for r in res.uplink_nodes)
        assert res.total_cost == pytest.approx(ring + ups, rel=1e-12)
        assert res.uplink_cost == pytest.approx(ups, rel=1e-12)

    def test_root_choice_seeded(self, snapshot):
        a = orbit_greedy(snapshot, 0, [3, 9], np.random.default_rng(8))
        b = orbit_greedy(snapshot, 0, [3, 9], np.random.default_rng(8))
        assert a.orbit_roots == b.orbit_roots and a.edges == b.edges

    def test_requires_constellation_graph(self):
        g = graph_of(3, [(0, 1, 1.0)])
        with pytest.raises(ValueError):
            orbit_greedy(g, 0, [0], np.random.default_rng(0))


class TestExactDstOracle:
    def test_terminals_cover_all_nodes_equals_msa(self):
        rng = np.random.default_rng(19)
        for _ in range(30):
            n, edges = random_digraph(rng, max_nodes=7, p=0.5)
            if not edges:
                continue
            root = 0
            reach = reaches_root(n, edges, root)
            if len(reach) < 2:
                continue
            g = graph_of(n, edges)
            try:
                arb = chu_liu_edmonds(g, root, nodes=reach)
            except RoutingInfeasibleError:
                continue
            assert exact_dst_oracle(g, sorted(reach), root) == pytest.approx(
                arb.total_cost, rel=1e-12)

    def test_root_only_zero(self):
        g = graph_of(3, [(0, 1, 1.0)])
        assert exact_dst_oracle(g, [1], 1) == 0.0

    def test_path_graph_end_terminals(self):
        g = graph_of(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)])
        assert exact_dst_oracle(g, [0, 3], 3) == pytest.approx(6.0)

    def test_size_limit(self):
        edges = [(i, i + 1, 1.0) for i in range(14)]
        g = graph_of(15, edges)
        with pytest.raises(OracleSizeLimitError):
            exact_dst_oracle(g, [0, 14], 14)


class TestSelectRoot:
    def test_min_uplink(self, delta_spec, params):
        import numpy as np

        from satagg import topology
        times = topology.TimeStructure.for_constellation(delta_spec)
        txp = topology.tx_power_draw(delta_spec, np.random.default_rng(0))
        g = topology.build_snapshot(delta_spec, params, times, 0.0, txp)
        terms = [5, 23, 41, 66]
        root = select_root(g, 0, terms)
        ups = {t: g.weights_j[0][g.edge_index[(t, g.geo_node)]] for t in terms}
        assert ups[root] == min(ups.values())

    def test_random_seeded(self):
        g = graph_of(4, [(0, 1, 1.0), (2, 1, 1.0), (3, 1, 1.0)])
        r1 = select_root(g, 0, [0, 2, 3], rule="random",
                         rng=np.random.default_rng(4))
        r2 = select_root(g, 0, [0, 2, 3], rule="random",
                         rng=np.random.default_rng(4))
        assert r1 == r2 and r1 in (0, 2, 3)


class TestTreeJson:
    def test_arborescence_schema(self, tmp_path):
        g = graph_of(3, [(1, 0, 1.0), (2, 1, 2.0)])
        arb = chu_liu_edmonds(g, 0)
        path = tmp_path / "tree.json"
        payload = tree_to_json(arb, g, 0, "taeer", path)
        assert payload["algorithm"] == "taeer"
        assert payload["root"] == 0
        assert payload["total_cost"] == 3.0
        assert payload["edges"] == [
            {"child": 1, "parent": 0, "weight_j": 1.0},
            {"child": 2, "parent": 1, "weight_j": 2.0},
        ]
        assert {"slot", "frame"} <= payload.keys()
        import json
        assert json.loads(path.read_text()) == payload

    def test_orbit_forest_schema(self, delta_spec, params):
        from satagg import topology
        times = topology.TimeStructure.for_constellation(delta_spec)
        txp = topology.tx_power_draw(delta_spec, np.random.default_rng(0))
        g = topology.build_snapshot(delta_spec, params, times, 0.0, txp)
        res = orbit_greedy(g, 0, [2, 25], np.random.default_rng(1))
        payload = tree_to_json(res, g, 0, "orbit_greedy")
        assert payload["root"] is None
        assert len(payload["orbit_roots"]) == 2
        assert len(payload["uplink_nodes"]) == 2


def test_complexity_smoke():
    """Runtime grows clearly sub-quadratically in |V| at fixed terminal count
    (ring + random chords, constellation-like density)."""
    rng = np.random.default_rng(31)

    def build(n):
        seen = set()
        edges = []

        def add(u, v):
            if u != v and (u, v) not in seen:
                seen.add((u, v))
                edges.append((u, v, float(rng.uniform(0.5, 1.5))))

        for i in range(n):
            add(i, (i + 1) % n)
            add(i, (i - 1) % n)
        for u, v in rng.integers(0, n, size=(2 * n, 2)):
            add(int(u), int(v))
        return graph_of(n, edges)

    sizes = (250, 2000)
    timings = []
    for n in sizes:
        g = build(n)
        terminals = sorted(int(x) for x in rng.choice(n, size=10, replace=False))
        root = terminals[0]
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            taeer(g, 0, terminals, root)
            best = min(best, time.perf_counter() - t0)
        timings.append(best)
    ratio = timings[1] / timings[0]
    size_ratio = sizes[1] / sizes[0]
    assert ratio < size_ratio ** 2, f"superquadratic scaling: {timings}"
    assert ratio > 1.0, f"runtime did not grow with |V|: {timings}"
