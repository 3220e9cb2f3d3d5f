"""Per-slot directed graphs over the constellation plus one GEO relay node.

A snapshot fixes connectivity for a whole time slot; the slot is subdivided
into frames and each edge carries one energy weight per frame, evaluated at
the frame midpoint geometry. Edge (i, j) and (j, i) are distinct entries: the
weight depends on the transmitter's power draw.
"""
import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import channel, geometry
from .channel import LinkParams
from .geometry import ConstellationSpec


@dataclass(frozen=True)
class TimeStructure:
    """Slot/frame subdivision of the (approximate) constellation period."""

    period_s: float
    slots_per_period: int
    frames_per_slot: int

    def __post_init__(self):
        if self.slots_per_period < 1 or self.frames_per_slot < 1:
            raise ValueError("slots_per_period and frames_per_slot must be >= 1")
        if self.period_s <= 0:
            raise ValueError("period_s must be > 0")

    @property
    def slot_len_s(self) -> float:
        return self.period_s / self.slots_per_period

    @property
    def frame_len_s(self) -> float:
        return self.slot_len_s / self.frames_per_slot

    @classmethod
    def for_constellation(cls, spec: ConstellationSpec, slot_len_s: float = 250.0,
                          frames_per_slot: int = 25) -> "TimeStructure":
        """Slot grid covering one orbital period; the period is rounded to a
        whole number of slots so slot_len_s is honoured exactly."""
        t_orb = geometry.orbital_period_s(spec)
        m = max(1, round(t_orb / slot_len_s))
        return cls(period_s=m * slot_len_s, slots_per_period=m,
                   frames_per_slot=frames_per_slot)


@dataclass(frozen=True)
class SnapshotGraph:
    """Directed weighted graph of one time slot.

    Edges are stored CSR-sorted by (src, dst); weights_j / distance_km /
    outage_prob are (frames, edges) arrays sharing that column order.
    geo_node is the index of the aggregate GEO relay (None for synthetic
    graphs). Instances are immutable; re-weighting returns a new graph.
    """

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weights_j: np.ndarray
    distance_km: np.ndarray
    outage_prob: np.ndarray
    slot_index: int
    frame_count: int
    node_orbit: np.ndarray | None = None
    node_slot: np.ndarray | None = None
    geo_node: int | None = None
    dropped_edges: int = 0

    @property
    def num_edges(self) -> int:
        return int(self.src.shape[0])

    @cached_property
    def indptr(self) -> np.ndarray:
        return np.searchsorted(self.src, np.arange(self.num_nodes + 1)).astype(np.int32)

    @cached_property
    def edge_index(self) -> dict:
        return {(int(u), int(v)): e
                for e, (u, v) in enumerate(zip(self.src, self.dst))}

    def frame_csr(self, u: int):
        """(indptr, indices, weights) for frame u, ready for the kernel."""
        return self.indptr, self.dst, self.weights_j[u]

    def out_edges(self, node: int):
        lo, hi = self.indptr[node], self.indptr[node + 1]
        return range(lo, hi)

    @classmethod
    def from_arrays(cls, num_nodes, src, dst, weights, *, distance_km=None,
                    outage_prob=None, slot_index=0, node_orbit=None,
                    node_slot=None, geo_node=None, dropped_edges=0):
        """Canonicalise edge order to (src, dst)-lexicographic and wrap.

        weights may be (E,) for a single frame or (U, E).
        """
        src = np.asarray(src, dtype=np.int32)
        dst = np.asarray(dst, dtype=np.int32)
        weights = np.atleast_2d(np.asarray(weights, dtype=float))
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed")
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if src.size > 1 and np.any((src[1:] == src[:-1]) & (dst[1:] == dst[:-1])):
            raise ValueError("parallel edges are not allowed; merge them first")
        weights = np.ascontiguousarray(weights[:, order])
        u_frames = weights.shape[0]
        if distance_km is None:
            distance_km = np.zeros_like(weights)
        else:
            distance_km = np.ascontiguousarray(np.atleast_2d(distance_km)[:, order])
        if outage_prob is None:
            outage_prob = np.zeros_like(weights)
        else:
            outage_prob = np.ascontiguousarray(np.atleast_2d(outage_prob)[:, order])
        return cls(num_nodes=num_nodes, src=src, dst=dst, weights_j=weights,
                   distance_km=distance_km, outage_prob=outage_prob,
                   slot_index=slot_index, frame_count=u_frames,
                   node_orbit=node_orbit, node_slot=node_slot,
                   geo_node=geo_node, dropped_edges=dropped_edges)

    @classmethod
    def from_edge_list(cls, num_nodes, edges, frame_count=1, slot_index=0):
        """Synthetic test graph from [(u, v, w), ...]; the same weight is
        replicated across frames."""
        if edges:
            src, dst, w = zip(*edges)
        else:
            src, dst, w = (), (), ()
        weights = np.tile(np.asarray(w, dtype=float), (frame_count, 1))
        return cls.from_arrays(num_nodes, np.asarray(src, dtype=np.int32),
                               np.asarray(dst, dtype=np.int32), weights,
                               slot_index=slot_index)


def tx_power_draw(spec: ConstellationSpec, rng: np.random.Generator,
                  low_w: float = 0.0316, high_w: float = 5.0) -> np.ndarray:
    """Per-satellite transmit power, drawn once per scenario."""
    return rng.uniform(low_w, high_w, size=spec.total_sats)


def build_snapshot(spec: ConstellationSpec, params: LinkParams,
                   times: TimeStructure, t_slot_start: float,
                   tx_power_w: np.ndarray, slot_index: int | None = None) -> SnapshotGraph:
    """Snapshot graph for the slot starting at t_slot_start.

    Connectivity is frozen at the slot start: both directions of every
    feasible LEO ISL, plus one uplink edge from every LEO to the aggregate
    GEO relay (whose coverage is global). Per-frame weights use the geometry
    at each frame midpoint.
    """
    if tx_power_w.shape[0] != spec.total_sats:
        raise ValueError("tx_power_w must hold one draw per satellite")
    n_leo = spec.total_sats
    geo = n_leo
    pos0 = geometry.positions(spec, t_slot_start)
    pairs = geometry.feasible_isl_pairs(spec, pos0)

    src = np.empty(2 * len(pairs) + n_leo, dtype=np.int32)
    dst = np.empty_like(src)
    for e, (i, j) in enumerate(pairs):
        src[2 * e], dst[2 * e] = i, j
        src[2 * e + 1], dst[2 * e + 1] = j, i
    src[2 * len(pairs):] = np.arange(n_leo)
    dst[2 * len(pairs):] = geo

    u_frames = times.frames_per_slot
    n_edges = src.shape[0]
    dist = np.empty((u_frames, n_edges))
    is_geo = dst == geo
    leo_src, leo_dst = src[~is_geo], dst[~is_geo]
    for u in range(u_frames):
        t_mid = t_slot_start + (u + 0.5) * times.frame_len_s
        pos = geometry.positions(spec, t_mid)
        dist[u, ~is_geo] = np.linalg.norm(pos[leo_src] - pos[leo_dst], axis=1)
        dist[u, is_geo] = geometry.geo_slant_range_km(pos[src[is_geo]], t_mid)

    p_t = tx_power_w[src]
    sigma2 = channel.noise_power(params)
    rate = channel.achievable_rate(channel.received_power(p_t, dist, params),
                                   sigma2, params)
    weights = channel.frame_energy(p_t, rate, params)
    outage = channel.outage_from_gamma0(channel.gamma0(p_t, dist, params), params)

    keep = np.all(np.isfinite(weights) & (weights > 0), axis=0)
    dropped = int(np.count_nonzero(~keep))
    orbit = np.concatenate([np.repeat(np.arange(spec.num_orbits, dtype=np.int32),
                                      spec.sats_per_orbit), [-1]])
    slot = np.concatenate([np.tile(np.arange(spec.sats_per_orbit, dtype=np.int32),
                                   spec.num_orbits), [0]])
    if slot_index is None:
        slot_index = int(round(t_slot_start / times.slot_len_s))
    return SnapshotGraph.from_arrays(
        n_leo + 1, src[keep], dst[keep], weights[:, keep],
        distance_km=dist[:, keep], outage_prob=outage[:, keep],
        slot_index=slot_index, node_orbit=orbit, node_slot=slot,
        geo_node=geo, dropped_edges=dropped)


def robust_weights(g: SnapshotGraph, rho: float, params: LinkParams) -> SnapshotGraph:
    """Blend energy with an outage penalty: rho*w + (1-rho)*ln(1/(1-P_out)).

    ISL edges in certain outage (P_out = 1 in any frame) are removed; the
    count is reported on the returned graph's dropped_edges. GEO uplink
    edges are outage-exempt (the relay hop is charged deterministically and
    never routed through), so they stay in the graph with penalty 0.
    rho = 1 leaves the weights bit-identical.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    out = g.outage_prob
    if g.geo_node is not None:
        out = np.where(g.dst[None, :] == g.geo_node, 0.0, out)
    keep = np.all(out < 1.0, axis=0)
    dropped = int(np.count_nonzero(~keep))
    out = out[:, keep]
    blended = rho * g.weights_j[:, keep] + (1.0 - rho) * np.log1p(out / (1.0 - out))
    return SnapshotGraph.from_arrays(
        g.num_nodes, g.src[keep], g.dst[keep], blended,
        distance_km=g.distance_km[:, keep], outage_prob=g.outage_prob[:, keep],
        slot_index=g.slot_index, node_orbit=g.node_orbit, node_slot=g.node_slot,
        geo_node=g.geo_node, dropped_edges=dropped)


def write_snapshot_csv(path, g: SnapshotGraph) -> None:
    """Edge-list export: one row per (frame, edge) for external plotting."""
    if g.node_orbit is None:
        raise ValueError("graph carries no orbit/slot labels to export")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "frame", "src_orbit", "src_slot", "dst_orbit",
                    "dst_slot", "distance_km", "weight_j", "outage_prob"])
        for u in range(g.frame_count):
            for e in range(g.num_edges):
                i, j = g.src[e], g.dst[e]
                w.writerow([g.slot_index, u,
                            int(g.node_orbit[i]), int(g.node_slot[i]),
                            int(g.node_orbit[j]), int(g.node_slot[j]),
                            repr(float(g.distance_km[u, e])),
                            repr(float(g.weights_j[u, e])),
                            repr(float(g.outage_prob[u, e]))])
