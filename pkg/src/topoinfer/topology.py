"""Network topologies and the random-walk transition matrix they induce."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, InvalidTopology, NoConvergence
from .numerics import TOLERANCES

DEFAULT_COMM_RANGE = 50.0


def _canonical_edges(edges) -> tuple[tuple[int, int], ...]:
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        out.add((min(u, v), max(u, v)))
    return tuple(sorted(out))


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph on nodes ``0..n-1``.

    ``edges`` are stored canonically as sorted ``(u, v)`` pairs with ``u < v``.
    When ``positions`` are given the edge set must match the geometric rule
    ``dist(u, v) <= comm_range``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    positions: tuple[tuple[float, float], ...] | None = None
    comm_range: float = DEFAULT_COMM_RANGE
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _edge_set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", _canonical_edges(self.edges))
        if self.n < 1:
            raise InvalidTopology("topology needs at least one node")
        for u, v in self.edges:
            if u == v:
                raise InvalidTopology(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidTopology(f"edge ({u}, {v}) outside [0, {self.n})")
        if self.positions is not None:
            pos = tuple((float(x), float(y)) for x, y in self.positions)
            if len(pos) != self.n:
                raise InvalidTopology("positions length differs from n")
            object.__setattr__(self, "positions", pos)
            if self.edges != _geometric_edges(pos, self.comm_range):
                raise InvalidTopology("edges disagree with positions and comm_range")
        adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))
        object.__setattr__(self, "_edge_set", frozenset(self.edges))
        if not is_connected(self):
            raise DisconnectedGraph(f"graph on {self.n} nodes is not connected")

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self._adj[u]

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=float)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        return A

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    def to_dict(self) -> dict:
        d = {"n": self.n, "edges": [list(e) for e in self.edges], "comm_range": self.comm_range}
        if self.positions is not None:
            d["positions"] = [list(p) for p in self.positions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(
            n=int(d["n"]),
            edges=tuple(tuple(e) for e in d["edges"]),
            positions=d.get("positions"),
            comm_range=float(d.get("comm_range", DEFAULT_COMM_RANGE)),
        )


def is_connected(topo: Topology) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in topo.neighbors(u):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == topo.n


def _geometric_edges(points, comm_range):
    edges = []
    for u in range(len(points)):
        for v in range(u + 1, len(points)):
            if math.dist(points[u], points[v]) <= comm_range:
                edges.append((u, v))
    return tuple(edges)


def from_positions(points, comm_range: float = DEFAULT_COMM_RANGE) -> Topology:
    pts = [tuple(map(float, p)) for p in points]
    if len(pts) < 2:
        raise InvalidTopology("need at least two points")
    if any(len(p) != 2 or not all(math.isfinite(c) for c in p) for p in pts):
        raise InvalidTopology("points must be finite 2-D coordinates")
    return Topology(n=len(pts), edges=_geometric_edges(pts, comm_range),
                    positions=tuple(pts), comm_range=float(comm_range))


def random_geometric(n: int, width: float, height: float, comm_range: float = DEFAULT_COMM_RANGE,
                     seed: int = 0, max_tries: int = 1000) -> tuple[Topology, int]:
    """Uniform placement in a ``width x height`` box, resampled until connected.

    Returns the topology and the number of placements drawn.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    for attempt in range(1, max_tries + 1):
        pts = np.column_stack([rng.uniform(0, width, n), rng.uniform(0, height, n)])
        try:
            return from_positions(pts.tolist(), comm_range), attempt
        except DisconnectedGraph:
            continue
    raise DisconnectedGraph(f"no connected placement in {max_tries} tries")


# ---------------------------------------------------------------- fixtures


def cycle(n: int) -> Topology:
    return Topology(n=n, edges=tuple((i, (i + 1) % n) for i in range(n)))


def path(n: int) -> Topology:
    return Topology(n=n, edges=tuple((i, i + 1) for i in range(n - 1)))


def complete(n: int) -> Topology:
    return Topology(n=n, edges=tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def star(n: int) -> Topology:
    return Topology(n=n, edges=tuple((0, i) for i in range(1, n)))


def grid(rows: int, cols: int) -> Topology:
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return Topology(n=rows * cols, edges=tuple(edges))


FIXTURES = {"cycle": cycle, "path": path, "complete": complete, "star": star, "grid": grid}


def fixture(spec: str) -> Topology:
    """Parse ``"cycle:6"``, ``"grid:3x3"`` and similar fixture names."""
    name, _, arg = spec.partition(":")
    if name not in FIXTURES:
        raise InvalidTopology(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    if name == "grid":
        rows, cols = arg.lower().split("x")
        return grid(int(rows), int(cols))
    return FIXTURES[name](int(arg))


def load(path_or_file) -> Topology:
    if hasattr(path_or_file, "read"):
        return Topology.from_dict(json.load(path_or_file))
    with open(path_or_file) as fh:
        return Topology.from_dict(json.load(fh))


def dump(topo: Topology, path_or_file) -> None:
    text = json.dumps(topo.to_dict(), indent=2) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
        return
    with open(path_or_file, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------- Markov matrices


def check_stochastic(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0):
        raise ValueError("transition matrix has negative entries")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > TOLERANCES["row_sum_tol"]:
        raise ValueError("rows of transition matrix do not sum to 1")
    return P


def is_irreducible(P) -> bool:
    P = np.asarray(P)
    n = P.shape[0]
    for start in range(n):
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(P[u] > 0):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        if len(seen) != n:
            return False
    return True


def random_walk_matrix(topo: Topology) -> np.ndarray:
    P = np.zeros((topo.n, topo.n))
    for u in range(topo.n):
        nbrs = topo.neighbors(u)
        if nbrs:
            P[u, list(nbrs)] = 1.0 / len(nbrs)
    return P


def stationary_distribution(P) -> np.ndarray:
    """Stationary distribution by power iteration on ``P^T``.

    Iterates the lazy chain ``(I + P) / 2``, which has the same stationary
    distribution but cannot oscillate on periodic chains.
    """
    P = check_stochastic(P)
    if not is_irreducible(P):
        raise ValueError("transition matrix is not irreducible")
    n = P.shape[0]
    lazy_T = 0.5 * (np.eye(n) + P.T)
    pi = np.full(n, 1.0 / n)
    tol = TOLERANCES["stationary_tol"]
    for _ in range(TOLERANCES["stationary_max_iter"]):
        nxt = lazy_T @ pi
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= tol:
            return nxt
        pi = nxt
    raise NoConvergence("stationary distribution did not converge")
