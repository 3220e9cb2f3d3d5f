"""Aggregation-tree routing: shortest paths, minimum spanning arborescence,
and the three tree-building algorithms compared by the simulator.

All trees use data-flow orientation: an edge (child, parent) means the child
transmits toward the root, so every non-root tree node has exactly one
outgoing edge. The arborescence solver reverses edges internally, runs the
classic min-incoming-edge / contract / expand procedure, and reverses back.

Tie-breaking is lexicographic by node id everywhere (Dijkstra heap order,
minimum-incoming-edge choice, cycle detection scan order) so identical inputs
always produce identical trees.
"""
import json
from dataclasses import dataclass

import numpy as np

from ._kernels import shortest_path_csr
from .topology import SnapshotGraph


class RoutingInfeasibleError(RuntimeError):
    """A required node cannot reach the root through the graph."""

    def __init__(self, stranded, what="node"):
        self.stranded = sorted(int(v) for v in stranded)
        super().__init__(f"{what}(s) cannot reach the root: {self.stranded}")


class OracleSizeLimitError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class ShortestPath:
    nodes: tuple            # source ... target
    edge_ids: tuple         # graph edge rows along the path
    cost: float


@dataclass(frozen=True)
class ShortestPathSet:
    """Per-terminal shortest paths to a common root, for one frame."""

    graph: SnapshotGraph
    frame: int
    root: int
    paths: dict  # terminal -> ShortestPath

    def path_nodes(self) -> set:
        out = {self.root}
        for p in self.paths.values():
            out.update(p.nodes)
        return out


@dataclass(frozen=True)
class Arborescence:
    """Rooted aggregation tree; edges are (child, parent) toward the root."""

    root: int
    edges: tuple
    total_cost: float
    edge_ids: tuple = ()

    def nodes(self) -> set:
        out = {self.root}
        for c, p in self.edges:
            out.update((c, p))
        return out

    def validate(self, terminals=None) -> None:
        """Raise AssertionError if any arborescence invariant is violated."""
        out_edge = {}
        for c, p in self.edges:
            assert c != self.root, "root must not transmit"
            assert c not in out_edge, f"node {c} has two outgoing edges"
            out_edge[c] = p
        for c in out_edge:
            seen = set()
            v = c
            while v != self.root:
                assert v in out_edge, f"node {v} does not reach the root"
                assert v not in seen, f"cycle through node {v}"
                seen.add(v)
                v = out_edge[v]
        if terminals is not None:
            term = set(terminals)
            assert term <= self.nodes(), "tree does not cover all terminals"
            parents = set(out_edge.values())
            for v in self.nodes() - parents - {self.root}:
                assert v in term, f"leaf {v} is not a terminal"


@dataclass(frozen=True)
class MergedPaths:
    """Union of per-terminal shortest paths (may not form a tree)."""

    root: int
    edges: tuple
    total_cost: float
    edge_ids: tuple = ()


@dataclass(frozen=True)
class OrbitForest:
    """Per-orbit ring arcs feeding one GEO uplink per occupied orbit."""

    orbit_roots: tuple      # (orbit, root node) pairs
    edges: tuple            # intra-orbit (child, parent) edges
    edge_ids: tuple
    uplink_nodes: tuple     # nodes transmitting to the GEO relay
    uplink_cost: float
    total_cost: float       # ring energy + uplink energy


def dijkstra(g: SnapshotGraph, u: int, source: int, target: int):
    """Minimum-weight directed path source -> target at frame u.

    Returns a ShortestPath, or None when the target is unreachable.
    """
    if source == target:
        return ShortestPath((source,), (), 0.0)
    indptr, indices, w = g.frame_csr(u)
    dist, pred = shortest_path_csr(indptr, indices, w, source, target)
    if not np.isfinite(dist[target]):
        return None
    rev = [target]
    while rev[-1] != source:
        rev.append(int(pred[rev[-1]]))
    nodes = tuple(reversed(rev))
    eids = tuple(g.edge_index[(nodes[i], nodes[i + 1])] for i in range(len(nodes) - 1))
    return ShortestPath(nodes, eids, float(dist[target]))


def shortest_paths_to_root(g: SnapshotGraph, u: int, terminals, root: int) -> ShortestPathSet:
    """Dijkstra from every terminal to the root; unreachable terminals raise."""
    paths = {}
    missing = []
    for t in sorted(set(terminals)):
        if t == root:
            continue
        p = dijkstra(g, u, t, root)
        if p is None:
            missing.append(t)
        else:
            paths[t] = p
    if missing:
        raise RoutingInfeasibleError(missing, what="terminal")
    return ShortestPathSet(graph=g, frame=u, root=root, paths=paths)


def build_substitute_graph(pathset: ShortestPathSet) -> SnapshotGraph:
    """Single-frame graph over the union of all path edges (deduplicated),
    keeping the original node indexing and weights."""
    g, u = pathset.graph, pathset.frame
    eids = sorted({e for p in pathset.paths.values() for e in p.edge_ids})
    idx = np.asarray(eids, dtype=np.int64)
    return SnapshotGraph.from_arrays(
        g.num_nodes, g.src[idx], g.dst[idx], g.weights_j[u][idx],
        distance_km=g.distance_km[u][idx], outage_prob=g.outage_prob[u][idx],
        slot_index=g.slot_index, node_orbit=g.node_orbit, node_slot=g.node_slot,
        geo_node=g.geo_node)


def _reachable_to_root(nodes, redges, root) -> set:
    adj = {}
    for u, v, _w, _e, _tb in redges:
        adj.setdefault(u, []).append(v)
    seen = {root}
    stack = [root]
    while stack:
        x = stack.pop()
        for y in adj.get(x, ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def _msa_edge_ids(nodes, redges, root, next_id):
    """Recursive contraction on the reversed graph; returns chosen edge ids.

    redges entries are (tail, head, weight, eid, tiebreak) with tiebreak the
    original (tail, head) pair, constant through contractions.
    """
    best = {}
    for ed in redges:
        u, v, w, eid, tb = ed
        if v == root:
            continue
        cur = best.get(v)
        if cur is None or (w, tb) < (cur[2], cur[4]):
            best[v] = ed

    cycle = None
    done = {root}
    for start in sorted(nodes):
        if start in done:
            continue
        order = {}
        path = []
        v = start
        while v not in done and v not in order:
            order[v] = len(path)
            path.append(v)
            v = best[v][0]
        if v in order:
            cycle = set(path[order[v]:])
            break
        done.update(path)
    if cycle is None:
        return [best[v][3] for v in nodes if v != root]

    c = next_id
    new_nodes = {x for x in nodes if x not in cycle}
    new_nodes.add(c)
    new_edges = []
    head_in_cycle = {}
    for u, v, w, eid, tb in redges:
        cu = c if u in cycle else u
        cv = c if v in cycle else v
        if cu == cv:
            continue
        if cv == c:
            new_edges.append((cu, cv, w - best[v][2], eid, tb))
            head_in_cycle[eid] = v
        else:
            new_edges.append((cu, cv, w, eid, tb))
    chosen = _msa_edge_ids(new_nodes, new_edges, root, next_id + 1)
    entering = [eid for eid in chosen if eid in head_in_cycle]
    v_star = head_in_cycle[entering[0]]
    chosen.extend(best[v][3] for v in cycle if v != v_star)
    return chosen


def chu_liu_edmonds(g: SnapshotGraph, root: int, u: int = 0, nodes=None) -> Arborescence:
    """Exact minimum spanning arborescence in data-flow orientation.

    Spans `nodes` (default: every node incident to an edge, plus the root).
    Raises RoutingInfeasibleError listing nodes that cannot reach the root.
    """
    if nodes is None:
        nodes = set(map(int, np.concatenate([g.src, g.dst]))) | {root}
    else:
        nodes = set(int(v) for v in nodes) | {root}
    w_row = g.weights_j[u]
    redges = []
    for e in range(g.num_edges):
        i, j = int(g.src[e]), int(g.dst[e])
        if i in nodes and j in nodes:
            redges.append((j, i, float(w_row[e]), e, (j, i)))
    reach = _reachable_to_root(nodes, redges, root)
    stranded = nodes - reach
    if stranded:
        raise RoutingInfeasibleError(stranded)
    if len(nodes) == 1:
        return Arborescence(root=root, edges=(), total_cost=0.0)
    chosen = _msa_edge_ids(nodes, redges, root, next_id=g.num_nodes)
    items = sorted(((int(g.src[e]), int(g.dst[e])), e) for e in chosen)
    eids = [e for _, e in items]
    cost = float(sum(w_row[e] for e in eids))
    return Arborescence(root=root, edges=tuple(p for p, _ in items),
                        total_cost=cost, edge_ids=tuple(eids))


def _prune_non_terminal_leaves(edges, root, terminals):
    """Drop leaves (nodes nobody transmits to) that are not terminals, to a
    fixpoint; returns the surviving (child, parent) pairs."""
    term = set(terminals)
    out_edge = {c: p for c, p in edges}
    in_count = {}
    for _c, p in edges:
        in_count[p] = in_count.get(p, 0) + 1
    queue = [v for v in sorted(out_edge) if in_count.get(v, 0) == 0 and v not in term]
    while queue:
        v = queue.pop()
        p = out_edge.pop(v)
        in_count[p] -= 1
        if in_count[p] == 0 and p not in term and p != root and p in out_edge:
            queue.append(p)
    return sorted(out_edge.items())


def taeer(g: SnapshotGraph, u: int, terminals, root: int) -> Arborescence:
    """Topology-aware energy-efficient routing for one frame.

    Per-terminal Dijkstra paths to the root are merged into a substitute
    graph, an exact minimum spanning arborescence of that graph is computed,
    and non-terminal leaves are pruned away. The result covers every
    terminal; cost is the sum of the surviving edge weights.
    """
    terminals = sorted(set(terminals))
    if root not in terminals:
        raise ValueError("root must be one of the terminals")
    if terminals == [root]:
        return Arborescence(root=root, edges=(), total_cost=0.0)
    pathset = shortest_paths_to_root(g, u, terminals, root)
    sub = build_substitute_graph(pathset)
    arb = chu_liu_edmonds(sub, root, u=0)
    kept = _prune_non_terminal_leaves(arb.edges, root, terminals)
    eids = [g.edge_index[p] for p in kept]
    cost = float(sum(g.weights_j[u][e] for e in eids))
    return Arborescence(root=root, edges=tuple(kept), total_cost=cost,
                        edge_ids=tuple(eids))


def d_merge(g: SnapshotGraph, u: int, terminals, root: int) -> MergedPaths:
    """Baseline: union of the per-terminal shortest paths, deduplicated."""
    terminals = sorted(set(terminals))
    if root not in terminals:
        raise ValueError("root must be one of the terminals")
    pathset = shortest_paths_to_root(g, u, terminals, root)
    eids = sorted({e for p in pathset.paths.values() for e in p.edge_ids})
    pairs = sorted((int(g.src[e]), int(g.dst[e])) for e in eids)
    eids = [g.edge_index[p] for p in pairs]
    cost = float(sum(g.weights_j[u][e] for e in eids))
    return MergedPaths(root=root, edges=tuple(pairs), total_cost=cost,
                       edge_ids=tuple(eids))


def _minimal_ring_arc(slots, ring_size):
    """Shortest contiguous arc of the ring covering all given slots, as the
    ordered slot sequence. The largest inter-terminal gap is left out."""
    ks = sorted(set(slots))
    if len(ks) == 1:
        return ks
    gaps = []
    for a, b in zip(ks, ks[1:] + [ks[0] + ring_size]):
        gaps.append(b - a)
    g_max = max(gaps)
    cut = gaps.index(g_max)  # first largest gap: deterministic
    start = ks[(cut + 1) % len(ks)]
    end = ks[cut]
    arc = [start]
    while arc[-1] != end:
        arc.append((arc[-1] + 1) % ring_size)
    return arc


def orbit_greedy(g: SnapshotGraph, u: int, terminals, rng: np.random.Generator) -> OrbitForest:
    """Baseline using intra-orbit links only.

    Each orbit holding terminals routes them along its minimal ring arc to a
    randomly chosen arc node, which uplinks to the GEO relay. Total cost
    includes the GEO uplink energy of every occupied orbit.
    """
    if g.node_orbit is None or g.geo_node is None:
        raise ValueError("orbit_greedy needs a constellation graph with a GEO node")
    by_orbit = {}
    for t in sorted(set(terminals)):
        by_orbit.setdefault(int(g.node_orbit[t]), []).append(t)
    ring_size = int(np.max(g.node_slot[:g.geo_node])) + 1
    w_row = g.weights_j[u]

    edges, eids, roots, uplinks = [], [], [], []
    ring_cost = 0.0
    uplink_cost = 0.0
    for orbit in sorted(by_orbit):
        members = by_orbit[orbit]
        base = members[0] - int(g.node_slot[members[0]])
        arc = _minimal_ring_arc([int(g.node_slot[t]) for t in members], ring_size)
        root_pos = int(rng.integers(len(arc)))
        root = base + arc[root_pos]
        roots.append((orbit, root))
        for idx in range(len(arc) - 1):
            a, b = base + arc[idx], base + arc[idx + 1]
            child, parent = (a, b) if idx < root_pos else (b, a)
            e = g.edge_index[(child, parent)]
            edges.append((child, parent))
            eids.append(e)
            ring_cost += w_row[e]
        up = g.edge_index[(root, g.geo_node)]
        uplinks.append(root)
        uplink_cost += w_row[up]
    order = np.argsort([c for c, _ in edges], kind="stable")
    edges = tuple(edges[i] for i in order)
    eids = tuple(eids[i] for i in order)
    return OrbitForest(orbit_roots=tuple(roots), edges=edges, edge_ids=eids,
                       uplink_nodes=tuple(uplinks), uplink_cost=float(uplink_cost),
                       total_cost=float(ring_cost + uplink_cost))


def exact_dst_oracle(g: SnapshotGraph, terminals, root: int, u: int = 0,
                     max_nodes: int = 12) -> float:
    """Exact minimum directed sub-branching cost by exhaustive enumeration
    over Steiner-node subsets, solving a spanning arborescence on each
    induced subgraph. Only viable for tiny instances."""
    active = set(map(int, np.concatenate([g.src, g.dst]))) | {root}
    if len(active) > max_nodes:
        raise OracleSizeLimitError(
            f"{len(active)} nodes exceed the {max_nodes}-node enumeration limit")
    terminals = set(terminals) | {root}
    candidates = sorted(active - terminals)
    best = np.inf
    for mask in range(1 << len(candidates)):
        chosen = {candidates[i] for i in range(len(candidates)) if mask >> i & 1}
        try:
            arb = chu_liu_edmonds(g, root, u=u, nodes=terminals | chosen)
        except RoutingInfeasibleError:
            continue
        if arb.total_cost < best:
            best = arb.total_cost
    if not np.isfinite(best):
        raise RoutingInfeasibleError(sorted(terminals - {root}), what="terminal")
    return float(best)


def select_root(g: SnapshotGraph, u: int, terminals, rule: str = "min_uplink",
                rng: np.random.Generator | None = None) -> int:
    """Pick the aggregation root among the terminals.

    'min_uplink' (default): the terminal with the cheapest GEO uplink at
    frame u, ties to the lowest node id. 'random': seeded uniform choice.
    """
    terms = sorted(set(terminals))
    if rule == "random":
        if rng is None:
            raise ValueError("random root selection needs an rng")
        return terms[int(rng.integers(len(terms)))]
    if rule != "min_uplink":
        raise ValueError(f"unknown root selection rule: {rule}")
    if g.geo_node is None:
        return terms[0]
    w_row = g.weights_j[u]
    costs = [w_row[g.edge_index[(t, g.geo_node)]] for t in terms]
    return terms[int(np.argmin(costs))]


def tree_to_json(result, g: SnapshotGraph, u: int, algorithm: str, path=None) -> dict:
    """Serialisable tree description (root, weighted edges, cost, provenance)."""
    w_row = g.weights_j[u]
    payload = {
        "algorithm": algorithm,
        "slot": g.slot_index,
        "frame": u,
        "root": getattr(result, "root", None),
        "total_cost": result.total_cost,
        "edges": [
            {"child": int(c), "parent": int(p), "weight_j": float(w_row[e])}
            for (c, p), e in zip(result.edges, result.edge_ids)
        ],
    }
    if isinstance(result, OrbitForest):
        payload["root"] = None
        payload["orbit_roots"] = [[int(o), int(r)] for o, r in result.orbit_roots]
        payload["uplink_nodes"] = [int(v) for v in result.uplink_nodes]
    if path is not None:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return payload
