"""RF sensors observing power bursts, and burst-to-transmitter recovery.

Received power follows the log-distance path-loss model

    P_rx = P_tx - (PL_1m + 10 * exponent * log10(d / 1 m))

and is floored at the sensor noise floor. Each kept interval becomes one
column of power readings; k-means over the columns groups intervals that
were likely produced by the same transmitter.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClustering, DegenerateInput, MissingPositions, ZeroDistance
from .markov_sim import TimeSeries
from .numerics import kmeans
from .topology import Topology
from .traffic_sim import TrafficConfig, bin_index

MIN_DISTANCE = 0.1


@dataclass(frozen=True)
class SensorField:
    sensor_positions: tuple[tuple[float, float], ...]
    tx_power_dbm: float = 16.0
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 46.7
    noise_floor_dbm: float = -95.0
    combine: str = "max"

    def __post_init__(self):
        pos = tuple((float(x), float(y)) for x, y in self.sensor_positions)
        if not pos:
            raise ValueError("need at least one sensor")
        if not self.path_loss_exponent > 0:
            raise ValueError("path loss exponent must be positive")
        if self.combine not in ("max", "linear-sum"):
            raise ValueError("combine must be 'max' or 'linear-sum'")
        object.__setattr__(self, "sensor_positions", pos)

    @property
    def s(self) -> int:
        return len(self.sensor_positions)


def random_sensor_field(count: int, width: float, height: float, seed: int = 0, **params) -> SensorField:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    pts = np.column_stack([rng.uniform(0, width, count), rng.uniform(0, height, count)])
    return SensorField(sensor_positions=tuple(map(tuple, pts.tolist())), **params)


def received_power(distance_m, field: SensorField):
    d = np.asarray(distance_m, dtype=float)
    return field.tx_power_dbm - (field.reference_loss_db + 10.0 * field.path_loss_exponent * np.log10(d))


@dataclass(frozen=True)
class PowerMatrix:
    values: np.ndarray           # s x T' in dBm
    interval_index: np.ndarray   # column -> original bin
    num_bins: int
    noise_floor_dbm: float

    @property
    def s(self) -> int:
        return self.values.shape[0]

    @property
    def T_kept(self) -> int:
        return self.values.shape[1]


def gain_matrix(topo: Topology, field: SensorField) -> np.ndarray:
    """``n x s`` received power from each transmitter at each sensor (dBm)."""
    if topo.positions is None:
        raise MissingPositions("sensor simulation needs transmitter positions")
    tx = np.asarray(topo.positions)
    rx = np.asarray(field.sensor_positions)
    dist = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=2)
    if np.any(dist < MIN_DISTANCE):
        u, s = np.argwhere(dist < MIN_DISTANCE)[0]
        raise ZeroDistance(f"sensor {s} within {MIN_DISTANCE} m of transmitter {u}")
    return received_power(dist, field)


def bin_transmitters(events, cfg: TrafficConfig) -> dict[int, set[int]]:
    """Original bin -> set of nodes transmitting in that bin."""
    out: dict[int, set[int]] = {}
    for ev in events:
        out.setdefault(bin_index(ev.time, cfg), set()).add(ev.node)
    return out


def detect_power(events, field: SensorField, topo: Topology, cfg: TrafficConfig) -> PowerMatrix:
    gains = gain_matrix(topo, field)
    floor = field.noise_floor_dbm
    active = bin_transmitters(events, cfg)
    cols, kept = [], []
    for b in sorted(active):
        g = gains[sorted(active[b])]
        if field.combine == "max":
            col = g.max(axis=0)
        else:
            col = 10.0 * np.log10(np.power(10.0, g / 10.0).sum(axis=0))
        if np.any(col > floor):
            cols.append(np.maximum(col, floor))
            kept.append(b)
    values = np.column_stack(cols) if cols else np.zeros((field.s, 0))
    return PowerMatrix(values=values, interval_index=np.asarray(kept, dtype=np.int64),
                       num_bins=cfg.num_bins, noise_floor_dbm=floor)


def cluster_bursts(pd: PowerMatrix, n: int, seed: int = 0, space: str = "db",
                   restarts: int | None = None) -> np.ndarray:
    """k-means (k = n) over the interval columns; returns a cluster id per kept interval."""
    if pd.T_kept < n:
        raise DegenerateClustering(f"{pd.T_kept} intervals cannot fill {n} clusters")
    X = pd.values.T
    if space == "linear":
        X = np.power(10.0, X / 10.0)
    elif space != "db":
        raise ValueError("space must be 'db' or 'linear'")
    try:
        _, labels, _ = kmeans(X, n, seed=seed, restarts=restarts)
    except DegenerateInput as exc:
        raise DegenerateClustering(str(exc)) from exc
    return labels


def _as_sets(truth) -> list[frozenset[int]]:
    out = []
    for t in truth:
        if isinstance(t, (set, frozenset, list, tuple)):
            out.append(frozenset(int(x) for x in t))
        elif t is None or int(t) < 0:
            out.append(frozenset())
        else:
            out.append(frozenset([int(t)]))
    return out


def label_and_reconstruct(assignment, ground_truth, n: int | None = None,
                          interval_index=None, num_bins: int | None = None):
    """Label clusters by majority transmitter and rebuild a time series.

    ``ground_truth[i]`` is the transmitter of kept interval ``i`` (an int), or
    the set of transmitters when several were active. Every member of a set
    votes for its cluster's label; an interval counts as correct only when it
    has a single transmitter equal to the label. Ties go to the smaller node
    index. Returns ``(TimeSeries, accuracy, labels_by_cluster)``; the series
    has ``num_bins`` columns placed at ``interval_index`` (defaults: one
    column per kept interval).
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    truth = _as_sets(ground_truth)
    if len(truth) != assignment.size:
        raise ValueError("assignment and ground truth lengths differ")
    votes: dict[int, Counter] = {}
    for c, members in zip(assignment.tolist(), truth):
        votes.setdefault(c, Counter()).update(members)
    labels = {}
    for c, cnt in votes.items():
        if cnt:
            best = max(cnt.values())
            labels[c] = min(u for u, v in cnt.items() if v == best)
        else:
            labels[c] = -1
    correct = sum(1 for c, members in zip(assignment.tolist(), truth)
                  if len(members) == 1 and labels[c] in members)
    accuracy = correct / assignment.size if assignment.size else 0.0
    if n is None:
        n = 1 + max([u for m in truth for u in m] + [v for v in labels.values()] + [0])
    if interval_index is None:
        interval_index = np.arange(assignment.size)
    interval_index = np.asarray(interval_index, dtype=np.int64)
    if num_bins is None:
        num_bins = int(interval_index.max()) + 1 if interval_index.size else 0
    bits = np.zeros((n, num_bins), dtype=np.uint8)
    for i, c in enumerate(assignment.tolist()):
        if labels[c] >= 0:
            bits[labels[c], interval_index[i]] = 1
    return TimeSeries(bits), accuracy, labels


def ground_truth_for(pd: PowerMatrix, events, cfg: TrafficConfig) -> list[frozenset[int]]:
    active = bin_transmitters(events, cfg)
    return [frozenset(active[int(b)]) for b in pd.interval_index]


def single_transmitter_fraction(truth) -> float:
    sets = _as_sets(truth)
    return sum(1 for s in sets if len(s) == 1) / len(sets) if sets else 0.0


def write_power_matrix(pd: PowerMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sensor"] + [int(b) for b in pd.interval_index])
        for s, row in enumerate(pd.values):
            w.writerow([s] + [repr(float(x)) for x in row])


def write_assignment(assignment, labels: dict, interval_index, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["interval", "cluster", "label"])
        for b, c in zip(np.asarray(interval_index).tolist(), np.asarray(assignment).tolist()):
            w.writerow([b, c, labels[c]])


def sensor_ts(events, topo: Topology, field: SensorField, cfg: TrafficConfig, seed: int = 0,
              space: str = "db", restarts: int | None = None):
    """Full sensor pipeline: events -> power matrix -> clusters -> time series.

    Returns ``(TimeSeries, accuracy, PowerMatrix, assignment, labels)``.
    """
    pd = detect_power(events, field, topo, cfg)
    assignment = cluster_bursts(pd, topo.n, seed=seed, space=space, restarts=restarts)
    truth = ground_truth_for(pd, events, cfg)
    ts, acc, labels = label_and_reconstruct(assignment, truth, n=topo.n,
                                            interval_index=pd.interval_index, num_bins=pd.num_bins)
    return ts, acc, pd, assignment, labels

