"""Command-line entry point: ``topoinfer <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 runtime error. Errors are printed
to stderr as a one-line JSON object ``{"error": ..., "message": ...}``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import estimator, files, harness, markov_sim, sensor_sim, te_baseline, topology, traffic_sim
from .errors import TopoInferError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base RNG seed (default 0)")
    p.add_argument("--config", type=Path, help="JSON config file (sections as in the README)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topoinfer", description="Wireless topology inference from transmission times.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="chains or packet traffic -> time-series CSV")
    _common(p)
    p.add_argument("--mode", choices=["chains", "traffic"], default="traffic")
    p.add_argument("--topology", type=Path, help="topology JSON file")
    p.add_argument("--fixture", help="named fixture, e.g. cycle:6, grid:3x3")
    p.add_argument("--window", type=float, help="traffic window in seconds")
    p.add_argument("--k", type=int, help="number of chains (chains mode)")
    p.add_argument("--steps", type=int, help="number of steps (chains mode)")
    p.add_argument("--laziness", type=float, default=None, help="holding probability added to the walk")

    p = sub.add_parser("sensors", help="event log -> power matrix, clusters, reconstructed TS")
    _common(p)
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--topology", type=Path, required=True, help="topology JSON with positions")
    p.add_argument("--window", type=float, required=True)
    p.add_argument("--sensor-positions", type=Path, help="JSON list of [x, y]; default random in the bounding box")
    p.add_argument("--sensor-count", type=int)

    p = sub.add_parser("estimate", help="time series or occupancy -> estimate bundle CSVs")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ts", type=Path)
    src.add_argument("--occupancy", type=Path)
    p.add_argument("--k", type=float, help="override the concurrency estimate")
    p.add_argument("--strict", action="store_true", help="fail on silent nodes")

    p = sub.add_parser("te", help="time series -> symmetrised transfer-entropy matrix")
    _common(p)
    p.add_argument("--ts", type=Path, required=True)
    p.add_argument("--history-d", type=int)
    p.add_argument("--source-history", type=int)

    p = sub.add_parser("eval", help="score matrix + topology -> report JSON")
    _common(p)
    p.add_argument("--matrix", type=Path, required=True)
    p.add_argument("--topology", type=Path, required=True)
    p.add_argument("--method", default="matrix")
    p.add_argument("--window", type=float)

    p = sub.add_parser("sweep", help="config -> report set JSON")
    _common(p)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-timestamp", action="store_true", help="omit generated_at (comparison mode)")
    return parser


def _config(args) -> dict:
    if args.config is None:
        return harness.merge_config(None)
    if not args.config.exists():
        raise UsageError(f"config file not found: {args.config}")
    return harness.load_config(args.config)


def _topology_from(args, cfg) -> topology.Topology:
    if getattr(args, "topology", None):
        return topology.load(args.topology)
    if getattr(args, "fixture", None):
        return topology.fixture(args.fixture)
    return harness.build_topology(cfg)


def _write_json(obj, path: Path) -> None:
    path.write_text(harness.dumps(obj))


def cmd_simulate(args, cfg, out: Path) -> dict:
    topo = _topology_from(args, cfg)
    topology.dump(topo, out / "topology.json")
    summary = {"mode": args.mode, "n": topo.n, "seed": args.seed}
    if args.mode == "chains":
        k = args.k if args.k is not None else int(cfg["chains"]["k"])
        steps = args.steps
        if steps is None:
            if args.window is None:
                raise UsageError("chains mode needs --steps or --window")
            steps = traffic_sim.TrafficConfig(window_seconds=args.window, **cfg["traffic"]).num_bins
        lazy = cfg["chains"].get("laziness", 0.0) if args.laziness is None else args.laziness
        P = topology.random_walk_matrix(topo)
        if lazy:
            P = lazy * np.eye(topo.n) + (1 - lazy) * P
        trace = markov_sim.simulate_chains(P, k, steps, args.seed)
        ts, collisions = markov_sim.to_time_series(trace)
        files.write_occupancy(trace, out / "occupancy.csv")
        files.write_matrix(P, out / "P.csv")
        summary.update(k=k, T=steps, collisions=collisions)
    else:
        if args.window is None:
            raise UsageError("traffic mode needs --window")
        tcfg = traffic_sim.TrafficConfig(window_seconds=args.window, seed=args.seed, **cfg["traffic"])
        events = traffic_sim.generate_traffic(topo, tcfg)
        traffic_sim.write_events(events, out / "events.csv")
        ts = traffic_sim.discretize(events, topo, tcfg)
        summary.update(window_seconds=args.window, T=ts.T, events=len(events),
                       collisions=traffic_sim.traffic_collisions(events, topo.n, tcfg))
    files.write_time_series(ts, out / "ts.csv")
    _write_json(summary, out / "simulate.json")
    return summary


def cmd_sensors(args, cfg, out: Path) -> dict:
    topo = topology.load(args.topology)
    if topo.positions is None:
        raise UsageError("sensors needs a topology file with positions")
    sc = cfg["sensors"]
    params = {k: sc[k] for k in ("tx_power_dbm", "path_loss_exponent", "reference_loss_db",
                                 "noise_floor_dbm", "combine")}
    if args.sensor_positions:
        field_ = sensor_sim.SensorField(sensor_positions=json.loads(args.sensor_positions.read_text()), **params)
    else:
        pos = np.asarray(topo.positions)
        count = args.sensor_count or int(sc["count"])
        field_ = sensor_sim.random_sensor_field(count, float(pos[:, 0].max()), float(pos[:, 1].max()),
                                                seed=harness.subseed(args.seed, 3), **params)
    tcfg = traffic_sim.TrafficConfig(window_seconds=args.window, **cfg["traffic"])
    events = traffic_sim.read_events(args.events)
    ts, acc, pd, assignment, labels = sensor_sim.sensor_ts(
        events, topo, field_, tcfg, seed=args.seed, space=sc.get("space", "db"), restarts=sc.get("restarts"))
    sensor_sim.write_power_matrix(pd, out / "pd.csv")
    sensor_sim.write_assignment(assignment, labels, pd.interval_index, out / "assignment.csv")
    files.write_time_series(ts, out / "ts.csv")
    summary = {"clustering_accuracy": acc, "kept_intervals": pd.T_kept, "sensors": field_.s,
               "sensor_positions": [list(p) for p in field_.sensor_positions]}
    _write_json(summary, out / "sensors.json")
    return {k: summary[k] for k in ("clustering_accuracy", "kept_intervals", "sensors")}


def cmd_estimate(args, cfg, out: Path) -> dict:
    if args.ts:
        state = estimator.EstimatorState.from_time_series(files.read_time_series(args.ts))
    else:
        state = estimator.EstimatorState.from_counts(files.read_occupancy(args.occupancy).counts)
    k = args.k if args.k is not None else cfg["estimator"].get("k")
    if isinstance(k, str):
        raise UsageError("estimator.k must be a number here")
    bundle = estimator.finalize(state, k=k, strict=args.strict)
    files.write_bundle(bundle, out)
    return {"k_used": bundle.k_used, "T": bundle.T, "silent_nodes": list(bundle.silent_nodes)}


def cmd_te(args, cfg, out: Path) -> dict:
    te_cfg = dict(cfg["te"])
    if args.history_d is not None:
        te_cfg["history_d"] = args.history_d
    if args.source_history is not None:
        te_cfg["source_history"] = args.source_history
    mat = te_baseline.te_matrix(files.read_time_series(args.ts), te_baseline.TEConfig(**te_cfg))
    files.write_matrix(mat, out / "te.csv")
    return {"n": mat.shape[0], **te_cfg}


def cmd_eval(args, cfg, out: Path) -> dict:
    report = harness.single_report(files.read_matrix(args.matrix), topology.load(args.topology),
                                   method=args.method, window_seconds=args.window)
    _write_json(report.to_dict(), out / "report.json")
    return report.to_dict()


def cmd_sweep(args, cfg, out: Path) -> dict:
    if args.seed is not None:
        cfg["eval"]["base_seed"] = args.seed
    reports = harness.sweep(cfg, workers=args.workers)
    doc = harness.reports_document(reports, cfg, timestamp=not args.no_timestamp)
    _write_json(doc, out / "reports.json")
    return {"reports": len(reports),
            "summary": [(r.method, r.window_seconds, r.proportion_correct) for r in reports]}


COMMANDS = {"simulate": cmd_simulate, "sensors": cmd_sensors, "estimate": cmd_estimate,
            "te": cmd_te, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; choose from " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        if args.command != "sweep" and args.seed is None:
            args.seed = 0
        args.out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](args, cfg, args.out)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except (TopoInferError, ValueError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_RUNTIME
    print(harness.dumps(result), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
