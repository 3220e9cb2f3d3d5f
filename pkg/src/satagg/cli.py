"""Command-line entry point.

Subcommands: generate-constellation, export-snapshot, run-scenario,
compare-algorithms, link-sweep, train. All outputs are deterministic for a
fixed (config, seed) pair. Exit codes: 0 success, 2 usage/validation errors,
1 runtime failures.
"""
import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from . import geometry, hierfl, sim, topology
from .hierfl import TrainingDivergedError


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="satagg",
        description="Constellation aggregation-routing simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None,
                        help="scenario config file (INI); defaults used if omitted")
        sp.add_argument("--seed", type=int, default=None, help="seed override (u64)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--rho", type=float, default=None,
                        help="energy/outage mixing override in [0, 1]")
        sp.add_argument("--algorithms", default=None,
                        help="comma list override, e.g. taeer,d_merge")

    common(sub.add_parser("run-scenario", help="run one algorithm, write metrics"))
    common(sub.add_parser("compare-algorithms",
                          help="run all configured algorithms side by side"))
    sp = sub.add_parser("generate-constellation", help="export ephemerides CSV")
    common(sp)
    sp.add_argument("--t", type=float, default=None,
                    help="single epoch in seconds (default: every slot start of one period)")
    sp = sub.add_parser("export-snapshot", help="export one slot's edge list CSV")
    common(sp)
    sp.add_argument("--slot", type=int, default=0, help="round/slot index")
    common(sub.add_parser("link-sweep", help="export link-budget sweep CSV"))
    common(sub.add_parser("train", help="synthetic federated training trace"))
    return p


def _overrides(args):
    algos = None
    if args.algorithms is not None:
        algos = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    return dict(seed=args.seed, rho=args.rho, algorithms=algos)


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _cmd_run_scenario(args) -> int:
    cfg = cfgmod.build_scenario(cfgmod.read_config(args.config), **_overrides(args))
    metrics = sim.run_scenario(cfg)
    sim.write_metrics_json(_out_path(args, "metrics.json"), metrics)
    sim.write_rounds_csv(_out_path(args, "rounds.csv"), metrics)
    print(f"algorithm={metrics.algorithm} rho={metrics.rho} "
          f"avg_energy_per_slot_j={metrics.avg_energy_per_slot_j:.4f} "
          f"avg_outage_pct={metrics.avg_outage_per_isl_pct}")
    return 0


def _cmd_compare(args) -> int:
    cfg = cfgmod.build_scenario(cfgmod.read_config(args.config), **_overrides(args))
    results = sim.compare_algorithms(cfg)
    sim.write_metrics_json(_out_path(args, "comparison.json"), results)
    for name in sorted(results):
        sim.write_rounds_csv(_out_path(args, f"rounds_{name}.csv"), results[name])
    print(sim.comparison_table(results))
    return 0


def _cmd_generate_constellation(args) -> int:
    values = cfgmod.read_config(args.config)
    cfg = cfgmod.build_scenario(values, **_overrides(args))
    if args.t is not None:
        times = [args.t]
    else:
        times = [m * cfg.times.slot_len_s for m in range(cfg.times.slots_per_period)]
    path = _out_path(args, "ephemerides.csv")
    geometry.write_ephemeris_csv(path, cfg.spec, times)
    print(f"wrote {path} ({len(times)} epochs x {cfg.spec.total_sats} satellites)")
    return 0


def _cmd_export_snapshot(args) -> int:
    cfg = cfgmod.build_scenario(cfgmod.read_config(args.config), **_overrides(args))
    master = np.random.SeedSequence(cfg.rng_seed)
    power_ss, _ = master.spawn(2)
    tx_power = topology.tx_power_draw(cfg.spec, np.random.default_rng(power_ss),
                                      cfg.tx_power_min_w, cfg.tx_power_max_w)
    t_abs = args.slot * cfg.times.slot_len_s
    g = topology.build_snapshot(cfg.spec, cfg.params, cfg.times, t_abs, tx_power,
                                slot_index=args.slot % cfg.times.slots_per_period)
    path = _out_path(args, f"snapshot_slot{args.slot}.csv")
    topology.write_snapshot_csv(path, g)
    print(f"wrote {path} ({g.num_edges} directed edges x {g.frame_count} frames)")
    return 0


def _cmd_link_sweep(args) -> int:
    cfg = cfgmod.build_scenario(cfgmod.read_config(args.config), **_overrides(args))
    distances = np.geomspace(100.0, 45000.0, 60)
    powers = [cfg.tx_power_min_w, 0.1, 0.5, 1.0, 2.5, cfg.tx_power_max_w]
    path = _out_path(args, "link_sweep.csv")
    sim.write_link_sweep_csv(path, cfg.params, distances, powers)
    print(f"wrote {path}")
    return 0


def _cmd_train(args) -> int:
    values = cfgmod.read_config(args.config)
    train = cfgmod.build_training(values)
    cfg = cfgmod.build_scenario(values, **_overrides(args))
    task_rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed, spawn_key=(4,)))
    tasks = hierfl.make_synthetic_tasks(
        num_devices=len(cfg.clusters), dim=train.dim,
        samples_per_device=train.samples_per_device, rng=task_rng,
        heterogeneity=train.heterogeneity, noise_std=train.noise_std,
        local_steps=train.local_steps, learning_rate=train.learning_rate,
        batch_size=train.batch_size)
    hierfl.check_learning_rate(tasks)

    energy_cfg = sim.ScenarioConfig(
        spec=cfg.spec, params=cfg.params, times=cfg.times, clusters=cfg.clusters,
        algorithms=cfg.algorithms, rho=cfg.rho, rounds=train.rounds,
        rng_seed=cfg.rng_seed, tx_power_min_w=cfg.tx_power_min_w,
        tx_power_max_w=cfg.tx_power_max_w, sample_outages=cfg.sample_outages,
        max_attempts=cfg.max_attempts, root_rule=cfg.root_rule)
    metrics = sim.run_scenario(energy_cfg)
    energy_per_round = [r.total_energy_j for r in metrics.records]

    sgd_rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed, spawn_key=(5,)))
    trace = hierfl.run_training(tasks, train.rounds, sgd_rng)
    path = _out_path(args, "loss_trace.csv")
    hierfl.write_loss_trace_csv(path, trace, energy_per_round)
    print(f"wrote {path} (final loss {trace[-1][1]:.6g}, "
          f"avg energy/round {metrics.avg_energy_per_slot_j:.4f} J)")
    return 0


_COMMANDS = {
    "run-scenario": _cmd_run_scenario,
    "compare-algorithms": _cmd_compare,
    "generate-constellation": _cmd_generate_constellation,
    "export-snapshot": _cmd_export_snapshot,
    "link-sweep": _cmd_link_sweep,
    "train": _cmd_train,
}


def parse_and_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
