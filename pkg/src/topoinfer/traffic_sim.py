"""Multi-hop packet traffic on a fixed topology, discretised into a time series.

A simplified stand-in for a full network simulator: routes are BFS shortest
paths with the smallest-index next hop, there is no control traffic, no MAC
contention and no loss. Only transmission times matter downstream.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .markov_sim import TimeSeries
from .topology import Topology


@dataclass(frozen=True)
class TrafficConfig:
    window_seconds: float
    num_messages: int = 500
    packets_per_message: int = 3
    packet_bytes: int = 100
    interval_seconds: float = 0.0015
    per_hop_delay_seconds: float = 0.0015
    seed: int = 0

    def __post_init__(self):
        for name in ("window_seconds", "num_messages", "packets_per_message", "packet_bytes",
                     "interval_seconds", "per_hop_delay_seconds"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.interval_seconds > self.window_seconds:
            raise ValueError("interval_seconds must not exceed window_seconds")

    @property
    def num_bins(self) -> int:
        # guard against 15 / 0.0015 evaluating to 10000.000000000002
        return max(1, math.ceil(round(self.window_seconds / self.interval_seconds, 9)))


@dataclass(frozen=True)
class TransmissionEvent:
    node: int
    time: float
    message_id: int
    hop_index: int


def _bfs_dist(topo: Topology, target: int) -> list[int]:
    dist = [-1] * topo.n
    dist[target] = 0
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for v in topo.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


class Router:
    """Shortest-path routes with lexicographically smallest next hop, cached per destination."""

    def __init__(self, topo: Topology):
        self.topo = topo
        self._dist: dict[int, list[int]] = {}

    def route(self, src: int, dst: int) -> list[int]:
        if dst not in self._dist:
            self._dist[dst] = _bfs_dist(self.topo, dst)
        dist = self._dist[dst]
        hops = [src]
        u = src
        while u != dst:
            u = min(v for v in self.topo.neighbors(u) if dist[v] == dist[u] - 1)
            hops.append(u)
        return hops


def shortest_path(topo: Topology, src: int, dst: int) -> list[int]:
    return Router(topo).route(src, dst)


def generate_traffic(topo: Topology, cfg: TrafficConfig) -> list[TransmissionEvent]:
    """Sample messages and emit one event per packet per transmitting hop.

    Each message picks an ordered pair ``src != dst`` uniformly. Its first hop
    starts at a uniform time chosen so that the last transmitting hop still
    falls inside the window; hop ``h`` transmits at ``start + h * delay``.
    The destination never transmits.
    """
    if topo.n < 2:
        raise ValueError("traffic needs at least two nodes")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    router = Router(topo)
    events: list[TransmissionEvent] = []
    for m in range(cfg.num_messages):
        src = int(rng.integers(topo.n))
        dst = int(rng.integers(topo.n - 1))
        dst += dst >= src
        route = router.route(src, dst)
        span = (len(route) - 2) * cfg.per_hop_delay_seconds
        latest = max(cfg.window_seconds - span, 0.0)
        start = float(rng.uniform(0.0, latest))
        for h, node in enumerate(route[:-1]):
            t = min(start + h * cfg.per_hop_delay_seconds, cfg.window_seconds)
            for _ in range(cfg.packets_per_message):
                events.append(TransmissionEvent(node=node, time=t, message_id=m, hop_index=h))
    return events


def bin_index(time: float, cfg: TrafficConfig) -> int:
    # times are multiples of the delay; nudge so exact bin edges land in the upper bin
    b = int(math.floor(time / cfg.interval_seconds + 1e-9))
    return min(max(b, 0), cfg.num_bins - 1)


def discretize(events, topo: Topology, cfg: TrafficConfig) -> TimeSeries:
    bits = np.zeros((topo.n, cfg.num_bins), dtype=np.uint8)
    for ev in events:
        if not 0.0 <= ev.time <= cfg.window_seconds:
            raise ValueError(f"event at {ev.time} outside window")
        bits[ev.node, bin_index(ev.time, cfg)] = 1
    return TimeSeries(bits)


def bin_occupancy(events, n: int, cfg: TrafficConfig) -> list[dict[int, set[int]]]:
    """Per bin, map node -> set of message ids transmitting there."""
    bins: list[dict[int, set[int]]] = [dict() for _ in range(cfg.num_bins)]
    for ev in events:
        bins[bin_index(ev.time, cfg)].setdefault(ev.node, set()).add(ev.message_id)
    return bins


def traffic_collisions(events, n: int, cfg: TrafficConfig) -> int:
    """Number of (node, bin) cells carrying packets of two or more messages."""
    return sum(1 for b in bin_occupancy(events, n, cfg) for msgs in b.values() if len(msgs) >= 2)


def mean_concurrency(ts: TimeSeries) -> float:
    """Average number of transmitting nodes per busy bin."""
    per_bin = ts.bits.sum(axis=0)
    busy = per_bin > 0
    return float(per_bin[busy].mean()) if busy.any() else 0.0


def write_events(events, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "time", "message_id", "hop_index"])
        for ev in events:
            w.writerow([ev.node, repr(ev.time), ev.message_id, ev.hop_index])


def read_events(path) -> list[TransmissionEvent]:
    with open(path, newline="") as fh:
        return [TransmissionEvent(int(r["node"]), float(r["time"]), int(r["message_id"]),
                                  int(r["hop_index"])) for r in csv.DictReader(fh)]
