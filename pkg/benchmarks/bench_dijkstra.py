"""Benchmark the compiled Dijkstra kernel against the pure-Python fallback.

Builds an 800/20/1 constellation snapshot and times single-source solves to
a fixed root with both kernels on identical CSR arrays, verifying that the
outputs match bit for bit. Also reports an end-to-end aggregation-tree solve
with whichever kernel the package selected at import.

Usage: python benchmarks/bench_dijkstra.py [--sats 800] [--orbits 20]
"""
import argparse
import time

import numpy as np

import satagg
from satagg import geometry, routing, sim, topology
from satagg._kernels import pure
from satagg.channel import LinkParams

try:
    from satagg._kernels import _dijkstra as compiled
except ImportError:
    compiled = None


def build_graph(total, orbits):
    spec = geometry.ConstellationSpec.walker(total, orbits, 1, 700.0, 99.5, "star")
    params = LinkParams()
    times = topology.TimeStructure.for_constellation(spec)
    rng = np.random.default_rng(0)
    txp = topology.tx_power_draw(spec, rng)
    g = topology.build_snapshot(spec, params, times, 0.0, txp)
    clusters = sim.random_clusters(41, rng)
    pos = geometry.positions(spec, 0.0)
    terminals = sorted({
        geometry.serving_satellite_index(
            geometry.cluster_position_km(c, 0.0)
            / np.linalg.norm(geometry.cluster_position_km(c, 0.0)), pos)
        for c in clusters})
    return g, terminals


def time_kernel(kernel, indptr, indices, weights, sources, target, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for s in sources:
            kernel.shortest_path_csr(indptr, indices, weights, s, target)
        best = min(best, time.perf_counter() - t0)
    return best / len(sources)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sats", type=int, default=800)
    ap.add_argument("--orbits", type=int, default=20)
    args = ap.parse_args()

    g, terminals = build_graph(args.sats, args.orbits)
    indptr, indices, weights = g.frame_csr(0)
    root = routing.select_root(g, 0, terminals)
    sources = [t for t in terminals if t != root]
    print(f"graph: {g.num_nodes} nodes, {g.num_edges} directed edges, "
          f"{len(sources)} sources")

    t_pure = time_kernel(pure, indptr, indices, weights, sources, root)
    print(f"pure python : {t_pure * 1e3:8.3f} ms per solve")
    if compiled is None:
        print("compiled    : extension not built (pip install -e . "
              "--no-build-isolation)")
    else:
        for s in sources:
            dc, pc = compiled.shortest_path_csr(indptr, indices, weights, s, root)
            dp, pp = pure.shortest_path_csr(indptr, indices, weights, s, root)
            assert np.array_equal(dc, dp) and np.array_equal(pc, pp), \
                f"kernel outputs diverge for source {s}"
        t_comp = time_kernel(compiled, indptr, indices, weights, sources, root)
        print(f"compiled    : {t_comp * 1e3:8.3f} ms per solve "
              f"({t_pure / t_comp:.1f}x speedup, outputs identical)")

    t0 = time.perf_counter()
    arb = routing.taeer(g, 0, terminals, root)
    dt = time.perf_counter() - t0
    print(f"end-to-end aggregation-tree frame solve "
          f"({satagg.kernel_implementation} kernel): {dt * 1e3:.1f} ms, "
          f"{len(arb.edges)} tree edges, cost {arb.total_cost:.3f} J")


if __name__ == "__main__":
    main()
