"""Multi-round scenario driver: terminals from cluster geometry, per-frame
routing, outage sampling with retransmissions, and metric accumulation.

Round t runs in the time slot starting at t * slot_len: the constellation is
propagated at that absolute epoch (Earth rotation shifts the cluster
longitudes, so terminal identities change across rounds) and the slot label
is t mod slots_per_period. Energy is always charged from the true per-frame
energy weights even when routing runs on outage-blended weights; the root's
GEO uplink is charged deterministically and reported in the totals.
"""
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, geometry, routing, topology
from .channel import LinkParams
from .geometry import ConstellationSpec, GroundCluster
from .topology import SnapshotGraph, TimeStructure

ALGORITHMS = ("taeer", "d_merge", "orbit_greedy")


@dataclass(frozen=True)
class ScenarioConfig:
    spec: ConstellationSpec
    params: LinkParams
    times: TimeStructure
    clusters: tuple
    algorithms: tuple = ("taeer",)
    rho: float = 1.0
    rounds: int = 50
    rng_seed: int = 0
    tx_power_min_w: float = 0.0316
    tx_power_max_w: float = 5.0
    sample_outages: bool | None = None   # None: sample iff rho < 1
    max_attempts: int = 100
    root_rule: str = "min_uplink"

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1]")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithm(s) {unknown}; choose from {ALGORITHMS}")
        if not self.clusters:
            raise ValueError("at least one ground cluster is required")
        total = sum(w for c in self.clusters for w in c.device_weights)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"device weights must sum to 1 (got {total!r})")
        if not 0 < self.tx_power_min_w <= self.tx_power_max_w:
            raise ValueError("require 0 < tx_power_min_w <= tx_power_max_w")

    @property
    def outages_enabled(self) -> bool:
        if self.sample_outages is None:
            return self.rho < 1.0
        return self.sample_outages

    @property
    def constellation_label(self) -> str:
        s = self.spec
        return (f"{s.total_sats}/{s.num_orbits}/{s.phasing_factor} "
                f"walker-{s.pattern}")


@dataclass
class RoundRecord:
    round_index: int
    slot_label: int
    algorithm: str
    root: int | None
    num_terminals: int
    tree_energy_j: float        # one attempt per used LEO-LEO edge, all frames
    retrans_energy_j: float
    geo_energy_j: float
    attempts: int
    failures: int
    analytic_outage_sum: float  # sum of per-edge-frame outage probabilities
    edge_frames: int            # number of (edge, frame) transmissions
    failed: bool

    @property
    def total_energy_j(self) -> float:
        return self.tree_energy_j + self.retrans_energy_j + self.geo_energy_j


@dataclass
class RunMetrics:
    algorithm: str
    rho: float
    constellation: str
    rounds: int
    seed: int
    avg_energy_per_slot_j: float
    avg_outage_per_isl_pct: float | None   # empirical, None when not sampled
    analytic_outage_pct: float
    failed_rounds: int
    records: list = field(default_factory=list)


def random_clusters(count: int, rng: np.random.Generator,
                    lat_band_deg: float = 60.0) -> tuple:
    """Clusters spread uniformly (by area) over the populated latitude band,
    one device each, equal aggregation weights."""
    zmax = math.sin(math.radians(lat_band_deg))
    lats = np.degrees(np.arcsin(rng.uniform(-zmax, zmax, count)))
    lons = rng.uniform(-180.0, 180.0, count)
    return tuple(GroundCluster(i, float(lats[i]), float(lons[i]), (1.0 / count,))
                 for i in range(count))


def terminals_for_round(cfg: ScenarioConfig, t_abs: float) -> tuple[dict, list]:
    """Serving satellite per cluster at the round epoch; returns the
    cluster -> node map and the deduplicated sorted terminal list."""
    pos = geometry.positions(cfg.spec, t_abs)
    mapping = {}
    for c in cfg.clusters:
        cp = geometry.cluster_position_km(c, t_abs)
        mapping[c.cluster_id] = geometry.serving_satellite_index(
            cp / np.linalg.norm(cp), pos)
    return mapping, sorted(set(mapping.values()))


def sample_attempts(rng: np.random.Generator, gamma0_value: float,
                    params: LinkParams, max_attempts: int = 100) -> tuple[int, bool]:
    """Transmission attempts for one frame on one edge.

    Each attempt draws a fresh pointing error theta = sigma_p*|z| and fails
    when the resulting pointing loss drops below gamma0. Returns (attempts,
    success); success is False when max_attempts all failed.
    """
    if gamma0_value >= 1.0:
        return max_attempts, False
    if gamma0_value <= 0.0:
        return 1, True
    z2_max = -math.log(gamma0_value) / (params.g0 * params.sigma_p_rad ** 2)
    for k in range(1, max_attempts + 1):
        z = rng.standard_normal()
        if z * z <= z2_max:
            return k, True
    return max_attempts, False


def _solve_frame(algorithm: str, g: SnapshotGraph, u: int, terminals,
                 root: int | None, rng: np.random.Generator):
    if algorithm == "taeer":
        return routing.taeer(g, u, terminals, root)
    if algorithm == "d_merge":
        return routing.d_merge(g, u, terminals, root)
    if algorithm == "orbit_greedy":
        return routing.orbit_greedy(g, u, terminals, rng)
    raise ValueError(f"unknown algorithm {algorithm}")


def _uplink_nodes(result) -> tuple:
    if isinstance(result, routing.OrbitForest):
        return result.uplink_nodes
    return (result.root,)


def _simulate(cfg: ScenarioConfig, algorithms, collect_edges: bool = False):
    """Shared driver; returns ({algorithm: RunMetrics}, edge collections).

    Every algorithm sees identical terminal sets and identical per-round rng
    seeds. Edge collections hold (tx_power, distance) per used LEO-LEO edge
    transmission, for threshold sweeps.
    """
    master = np.random.SeedSequence(cfg.rng_seed)
    power_ss, rounds_ss = master.spawn(2)
    tx_power = topology.tx_power_draw(cfg.spec, np.random.default_rng(power_ss),
                                      cfg.tx_power_min_w, cfg.tx_power_max_w)
    round_seeds = rounds_ss.spawn(cfg.rounds)
    u_frames = cfg.times.frames_per_slot
    m_slots = cfg.times.slots_per_period

    records = {a: [] for a in algorithms}
    collected = {a: ([], []) for a in algorithms}  # (p_t list, d_km list)

    for t in range(cfg.rounds):
        t_abs = t * cfg.times.slot_len_s
        graph = topology.build_snapshot(cfg.spec, cfg.params, cfg.times, t_abs,
                                        tx_power, slot_index=t % m_slots)
        if cfg.rho < 1.0:
            route_graph = topology.robust_weights(graph, cfg.rho, cfg.params)
        else:
            route_graph = graph
        _, terminals = terminals_for_round(cfg, t_abs)

        for algorithm in algorithms:
            rng = np.random.default_rng(round_seeds[t])
            root = None
            if algorithm in ("taeer", "d_merge"):
                root = routing.select_root(graph, 0, terminals, cfg.root_rule, rng)
            rec = RoundRecord(round_index=t, slot_label=t % m_slots,
                              algorithm=algorithm, root=root,
                              num_terminals=len(terminals), tree_energy_j=0.0,
                              retrans_energy_j=0.0, geo_energy_j=0.0,
                              attempts=0, failures=0, analytic_outage_sum=0.0,
                              edge_frames=0, failed=False)
            try:
                for u in range(u_frames):
                    result = _solve_frame(algorithm, route_graph, u, terminals,
                                          root, rng)
                    eids = [graph.edge_index[pair] for pair in result.edges]
                    w_true = graph.weights_j[u]
                    rec.tree_energy_j += float(sum(w_true[e] for e in eids))
                    for node in _uplink_nodes(result):
                        rec.geo_energy_j += float(
                            w_true[graph.edge_index[(node, graph.geo_node)]])
                    rec.analytic_outage_sum += float(
                        sum(graph.outage_prob[u][e] for e in eids))
                    rec.edge_frames += len(eids)
                    if collect_edges:
                        collected[algorithm][0].extend(
                            tx_power[graph.src[e]] for e in eids)
                        collected[algorithm][1].extend(
                            graph.distance_km[u][e] for e in eids)
                    if cfg.outages_enabled:
                        for e in eids:
                            g0_val = channel.gamma0(tx_power[graph.src[e]],
                                                    graph.distance_km[u][e],
                                                    cfg.params)
                            k, ok = sample_attempts(rng, g0_val, cfg.params,
                                                    cfg.max_attempts)
                            rec.attempts += k
                            rec.failures += k - 1 if ok else k
                            rec.retrans_energy_j += (k - 1) * float(w_true[e])
                            if not ok:
                                rec.failed = True
                    else:
                        rec.attempts += len(eids)
            except routing.RoutingInfeasibleError:
                rec.failed = True
            records[algorithm].append(rec)

    out = {}
    for algorithm in algorithms:
        recs = records[algorithm]
        good = [r for r in recs if not r.failed]
        energy = (sum(r.total_energy_j for r in good) / len(good)) if good else float("nan")
        attempts = sum(r.attempts for r in recs)
        failures = sum(r.failures for r in recs)
        outage = (100.0 * failures / attempts
                  if cfg.outages_enabled and attempts else None)
        frames = sum(r.edge_frames for r in recs)
        analytic = (100.0 * sum(r.analytic_outage_sum for r in recs) / frames
                    if frames else 0.0)
        out[algorithm] = RunMetrics(
            algorithm=algorithm, rho=cfg.rho,
            constellation=cfg.constellation_label, rounds=cfg.rounds,
            seed=cfg.rng_seed, avg_energy_per_slot_j=float(energy),
            avg_outage_per_isl_pct=outage, analytic_outage_pct=float(analytic),
            failed_rounds=len(recs) - len(good), records=recs)
    edge_data = {a: (np.asarray(p), np.asarray(d)) for a, (p, d) in collected.items()}
    return out, edge_data


def run_scenario(cfg: ScenarioConfig, algorithm: str | None = None) -> RunMetrics:
    """Run one algorithm over cfg.rounds rounds; deterministic under seed."""
    algorithm = algorithm or cfg.algorithms[0]
    results, _ = _simulate(cfg, (algorithm,))
    return results[algorithm]


def compare_algorithms(cfg: ScenarioConfig) -> dict:
    """Run every configured algorithm on identical terminal sets and
    per-round seeds; returns {algorithm: RunMetrics}."""
    results, _ = _simulate(cfg, tuple(cfg.algorithms))
    return results


def sweep_snr_threshold(cfg: ScenarioConfig, thresholds_db,
                        algorithm: str | None = None) -> list:
    """Analytic per-ISL outage of the routed trees under a range of receiver
    SNR thresholds. Routing is done once at cfg.params' threshold and the
    used edges are held fixed, so each sweep point re-evaluates only the
    outage probability; per-edge monotonicity in the threshold is preserved
    exactly."""
    algorithm = algorithm or cfg.algorithms[0]
    _, edges = _simulate(cfg, (algorithm,), collect_edges=True)
    p_t, d_km = edges[algorithm]
    out = []
    for th in thresholds_db:
        params = LinkParams(**{**_params_kwargs(cfg.params), "snr_th_db": float(th)})
        pout = channel.outage_from_gamma0(channel.gamma0(p_t, d_km, params), params)
        out.append((float(th), float(100.0 * np.mean(pout))))
    return out


def _params_kwargs(params: LinkParams) -> dict:
    return {f: getattr(params, f) for f in LinkParams.__dataclass_fields__}


def comparison_table(results: dict) -> str:
    """Fixed-width text table of the headline metrics per algorithm."""
    names = sorted(results)
    lines = [f"{'metric':<28}" + "".join(f"{n:>16}" for n in names)]
    lines.append(f"{'avg energy per slot (J)':<28}" + "".join(
        f"{results[n].avg_energy_per_slot_j:>16.4f}" for n in names))
    row = []
    for n in names:
        v = results[n].avg_outage_per_isl_pct
        row.append(f"{'-':>16}" if v is None else f"{v:>16.3f}")
    lines.append(f"{'avg outage per ISL (%)':<28}" + "".join(row))
    lines.append(f"{'failed rounds':<28}" + "".join(
        f"{results[n].failed_rounds:>16d}" for n in names))
    return "\n".join(lines)


def metrics_payload(m: RunMetrics) -> dict:
    return {
        "algorithm": m.algorithm,
        "rho": m.rho,
        "constellation": m.constellation,
        "avg_energy_per_slot_j": m.avg_energy_per_slot_j,
        "avg_outage_pct": m.avg_outage_per_isl_pct,
        "analytic_outage_pct": m.analytic_outage_pct,
        "rounds": m.rounds,
        "seed": m.seed,
        "failed_rounds": m.failed_rounds,
    }


def write_metrics_json(path, metrics) -> None:
    """Stable-schema JSON export; accepts one RunMetrics or {name: RunMetrics}."""
    if isinstance(metrics, RunMetrics):
        payload = metrics_payload(metrics)
    else:
        payload = {name: metrics_payload(m) for name, m in sorted(metrics.items())}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_rounds_csv(path, metrics: RunMetrics) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "slot", "algorithm", "root", "num_terminals",
                    "tree_energy_j", "retrans_energy_j", "geo_energy_j",
                    "total_energy_j", "attempts", "failures", "failed"])
        for r in metrics.records:
            w.writerow([r.round_index, r.slot_label, r.algorithm,
                        "" if r.root is None else r.root, r.num_terminals,
                        repr(r.tree_energy_j), repr(r.retrans_energy_j),
                        repr(r.geo_energy_j), repr(r.total_energy_j),
                        r.attempts, r.failures, int(r.failed)])


def write_link_sweep_csv(path, params: LinkParams, distances_km, powers_w) -> None:
    """Link-budget sweep export (d_km, p_t_w, rx_power_w, snr_db, rate_bps,
    energy_j, outage_prob) over the given grids."""
    sigma2 = channel.noise_power(params)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d_km", "p_t_w", "rx_power_w", "snr_db", "rate_bps",
                    "energy_j", "outage_prob"])
        for p_t in powers_w:
            for d in distances_km:
                m = channel.link_metrics(float(p_t), float(d), params)
                w.writerow([repr(float(d)), repr(float(p_t)), repr(m.rx_power_w),
                            repr(10.0 * math.log10(m.snr_linear)),
                            repr(m.rate_bps), repr(m.energy_j),
                            repr(m.outage_prob)])
