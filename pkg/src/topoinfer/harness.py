"""Experiment orchestration: link-recovery scoring, replications, window sweeps."""
from __future__ import annotations

import copy
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import estimator, markov_sim, sensor_sim, te_baseline, topology, traffic_sim
from .errors import ConfigError, TopoInferError, TruthEmpty

log = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    # "ideal": exact transmission times; "sensors": TS rebuilt from RF sensors;
    # "chains": k anonymous Markov walkers on the topology's random walk
    "scenario": "ideal",
    "topology": {"fixture": "cycle:6", "comm_range": 50.0},
    "traffic": {
        "num_messages": 500,
        "packets_per_message": 3,
        "packet_bytes": 100,
        "interval_seconds": 0.0015,
        "per_hop_delay_seconds": 0.0015,
    },
    "sensors": {
        "count": 100,
        "tx_power_dbm": 16.0,
        "path_loss_exponent": 3.0,
        "reference_loss_db": 46.7,
        "noise_floor_dbm": -95.0,
        "combine": "max",
        "space": "db",
        "restarts": 20,
    },
    "chains": {"k": 2, "observe": "bits", "laziness": 0.0},
    "estimator": {"k": None, "score": "L_sym"},
    "te": {"history_d": 5, "source_history": 1},
    # 50 replications for fixtures; sensor boxes are usually run with 5-20
    "eval": {"windows": [1.0, 15.0], "replications": 50, "base_seed": 0,
             "methods": ["markov", "te"], "workers": 1},
}

METHODS = ("markov", "te")


def merge_config(overrides: dict | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    unknown = set(overrides or {}) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    for section, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(cfg.get(section), dict):
            if section == "topology" and set(value) & {"fixture", "file", "random_box", "edges"}:
                cfg[section] = {"comm_range": cfg[section]["comm_range"]}
            cfg[section].update(value)
        else:
            cfg[section] = value
    if cfg["scenario"] not in ("ideal", "sensors", "chains"):
        raise ConfigError(f"unknown scenario {cfg['scenario']!r}")
    bad = set(cfg["eval"]["methods"]) - set(METHODS)
    if bad:
        raise ConfigError(f"unknown methods {sorted(bad)}")
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            return merge_config(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------- scoring


def upper_pairs_ranked(score) -> list[tuple[int, int]]:
    """Strict upper-triangle pairs by decreasing score, ties by (u, v) ascending."""
    S = np.asarray(score, dtype=float)
    n = S.shape[0]
    iu, ju = np.triu_indices(n, 1)
    vals = np.nan_to_num(S[iu, ju], nan=-np.inf)
    # lexsort: last key is primary; row-major triu order already encodes (u, v)
    order = np.lexsort((np.arange(iu.size), -vals))
    return [(int(iu[k]), int(ju[k])) for k in order]


def top_m_score(score, truth: topology.Topology) -> float:
    """Fraction of true links among the ``m = |E|`` highest upper-triangular scores."""
    S = np.asarray(score, dtype=float)
    if S.shape != (truth.n, truth.n):
        raise ValueError("score matrix shape differs from topology size")
    m = len(truth.edges)
    if m == 0:
        raise TruthEmpty("ground-truth topology has no links")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12, equal_nan=True):
        log.warning("score matrix not symmetric; symmetrising before ranking")
        S = 0.5 * (S + S.T)
    chosen = upper_pairs_ranked(S)[:m]
    return sum(1 for u, v in chosen if truth.has_edge(u, v)) / m


# ---------------------------------------------------------------- reports


@dataclass
class EvalReport:
    method: str
    window_seconds: float
    replications: int
    proportion_correct: float
    ci95: float
    per_seed: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def mean_ci95(values) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width."""
    x = [float(v) for v in values]
    if not x:
        return float("nan"), 0.0
    mean = math.fsum(x) / len(x)
    if len(x) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in x) / (len(x) - 1)
    return mean, 1.96 * math.sqrt(var / len(x))


def _mean_or_none(values):
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


# ---------------------------------------------------------------- replications


def subseed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(tag)]).generate_state(1, np.uint64)[0])


def build_topology(cfg: dict) -> topology.Topology:
    t = cfg["topology"]
    rng_ = float(t.get("comm_range", topology.DEFAULT_COMM_RANGE))
    if "file" in t:
        return topology.load(t["file"])
    if "fixture" in t:
        return topology.fixture(t["fixture"])
    if "edges" in t:
        return topology.Topology.from_dict({"comm_range": rng_, **t})
    if "random_box" in t:
        box = t["random_box"]
        topo, _ = topology.random_geometric(int(box["n"]), float(box["width"]), float(box["height"]),
                                            rng_, seed=int(t.get("seed", 0)))
        return topo
    raise ConfigError("topology section needs one of: fixture, file, edges, random_box")


def _box_size(cfg: dict, topo: topology.Topology) -> tuple[float, float]:
    box = cfg["topology"].get("random_box")
    if box:
        return float(box["width"]), float(box["height"])
    pos = np.asarray(topo.positions)
    return float(pos[:, 0].max()), float(pos[:, 1].max())


def _traffic_cfg(cfg: dict, window: float, seed: int) -> traffic_sim.TrafficConfig:
    return traffic_sim.TrafficConfig(window_seconds=float(window), seed=seed, **cfg["traffic"])


def run_replication(cfg: dict, topo: topology.Topology, window: float, seed: int) -> dict:
    """One simulated observation window; returns per-method scores and diagnostics."""
    scenario = cfg["scenario"]
    diag: dict = {"collisions": None, "clustering_accuracy": None, "k_hat": None}
    k_override = cfg["estimator"].get("k")
    tcfg = _traffic_cfg(cfg, window, subseed(seed, 1))
    if scenario == "chains":
        ch = cfg["chains"]
        P = topology.random_walk_matrix(topo)
        lazy = float(ch.get("laziness", 0.0))
        if lazy:
            P = lazy * np.eye(topo.n) + (1 - lazy) * P
        trace = markov_sim.simulate_chains(P, int(ch["k"]), tcfg.num_bins, subseed(seed, 2))
        ts, diag["collisions"] = markov_sim.to_time_series(trace)
        data = trace if ch.get("observe", "bits") == "counts" else ts
        if k_override == "true":
            k_override = int(ch["k"])
    else:
        events = traffic_sim.generate_traffic(topo, tcfg)
        diag["collisions"] = traffic_sim.traffic_collisions(events, topo.n, tcfg)
        if scenario == "ideal":
            ts = traffic_sim.discretize(events, topo, tcfg)
        else:
            sc = dict(cfg["sensors"])
            width, height = _box_size(cfg, topo)
            field_ = sensor_sim.random_sensor_field(
                int(sc.pop("count")), width, height, seed=subseed(seed, 3),
                **{k: sc.pop(k) for k in ("tx_power_dbm", "path_loss_exponent",
                                          "reference_loss_db", "noise_floor_dbm", "combine")})
            ts, acc, *_ = sensor_sim.sensor_ts(events, topo, field_, tcfg, seed=subseed(seed, 4),
                                               space=sc.get("space", "db"),
                                               restarts=sc.get("restarts"))
            diag["clustering_accuracy"] = acc
        data = ts
        if k_override == "true":
            raise ConfigError("estimator.k = 'true' only applies to the chains scenario")
    scores = {}
    state = (estimator.EstimatorState.from_counts(data.counts) if hasattr(data, "counts")
             else estimator.EstimatorState.from_time_series(data))
    diag["k_hat"] = estimator.estimate_k(state)
    methods = cfg["eval"]["methods"]
    if "markov" in methods:
        bundle = estimator.finalize(state, k=k_override)
        scores["markov"] = top_m_score(getattr(bundle, cfg["estimator"].get("score", "L_sym")), topo)
    if "te" in methods:
        tecfg = te_baseline.TEConfig(**cfg["te"])
        scores["te"] = top_m_score(te_baseline.te_matrix(ts, tecfg), topo)
    return {"scores": scores, "diagnostics": diag}


def _task(args):
    cfg, topo_dict, window, seed = args
    topo = topology.Topology.from_dict(topo_dict)
    try:
        return run_replication(cfg, topo, window, seed)
    except TopoInferError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def sweep(cfg: dict | None = None, windows=None, seeds=None, methods=None,
          workers: int | None = None) -> list[EvalReport]:
    """Run every (window, seed) replication and aggregate one report per method and window.

    Failed replications are recorded in ``failures`` and excluded from the mean.
    Aggregation is a fold in seed order, so results do not depend on ``workers``.
    """
    cfg = merge_config(cfg)
    ev = cfg["eval"]
    if methods is not None:
        ev["methods"] = list(methods)
    windows = list(ev["windows"] if windows is None else windows)
    if seeds is None:
        seeds = [int(ev["base_seed"]) + r for r in range(int(ev["replications"]))]
    seeds = list(seeds)
    if not windows or not seeds:
        raise ConfigError("need at least one window and one seed")
    workers = int(ev.get("workers", 1) if workers is None else workers)
    topo = build_topology(cfg)
    tasks = [(cfg, topo.to_dict(), float(w), int(s)) for w in windows for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    reports = []
    it = iter(results)
    for w in windows:
        block = [next(it) for _ in seeds]
        for method in ev["methods"]:
            ok = [(s, r) for s, r in zip(seeds, block) if "error" not in r]
            per_seed = [r["scores"][method] for _, r in ok]
            mean, ci = mean_ci95(per_seed) if per_seed else (None, 0.0)
            diags = [r["diagnostics"] for _, r in ok]
            reports.append(EvalReport(
                method=method,
                window_seconds=float(w),
                replications=len(per_seed),
                proportion_correct=mean,
                ci95=ci,
                per_seed=per_seed,
                seeds=[s for s, _ in ok],
                failures=[{"seed": s, "error": r["error"]} for s, r in zip(seeds, block) if "error" in r],
                diagnostics={key: _mean_or_none(d[key] for d in diags)
                             for key in ("k_hat", "collisions", "clustering_accuracy")},
            ))
    return reports


def single_report(score, truth: topology.Topology, method: str = "matrix",
                  window_seconds: float | None = None) -> EvalReport:
    value = top_m_score(score, truth)
    return EvalReport(method=method, window_seconds=window_seconds, replications=1,
                      proportion_correct=value, ci95=0.0, per_seed=[value])


def reports_document(reports, cfg: dict | None = None, timestamp: bool = True) -> dict:
    doc = {"reports": [r.to_dict() for r in reports]}
    if cfg is not None:
        doc["config"] = cfg
    if timestamp:
        doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    return doc


def comparable(doc: dict) -> dict:
    """Copy of a report document without the timestamp field."""
    return {k: v for k, v in doc.items() if k != "generated_at"}


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")
