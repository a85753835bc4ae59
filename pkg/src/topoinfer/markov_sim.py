"""Simulation of k independent stationary chains observed only through occupancy.

Random numbers come from numpy's PCG64. ``SeedSequence(seed).spawn(k)``
gives one child stream per chain; chain ``i`` draws ``T`` uniforms from its
stream, uses the first for its initial state and uniform ``t`` for the move
into step ``t`` (inverse-CDF sampling on the rows of ``P``). Results are thus
independent of how the chains are scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import check_stochastic, is_irreducible, stationary_distribution

_BLOCK = 4096


@dataclass(frozen=True)
class TimeSeries:
    """Binary ``n x T`` transmission matrix; ``bits[v, t] == 1`` if v was active at t."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError("time series must be a 2-D n x T array")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("time series entries must be 0 or 1")
        b = b.astype(np.uint8)
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def T(self) -> int:
        return self.bits.shape[1]

    def __eq__(self, other):
        return isinstance(other, TimeSeries) and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class OccupancyTrace:
    """Occupancy counts ``counts[t, v]`` = number of chains at v at step t."""

    k: int
    counts: np.ndarray
    trajectories: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or np.any(c < 0):
            raise ValueError("counts must be a nonnegative T x n integer array")
        if not np.all(c.sum(axis=1) == self.k):
            raise ValueError("occupancy counts do not sum to k at every step")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)
        if self.trajectories is not None:
            tr = np.asarray(self.trajectories, dtype=np.int64)
            if tr.shape != (self.k, c.shape[0]):
                raise ValueError("trajectories must be k x T")
            if not np.array_equal(occupancy_from_trajectories(tr, c.shape[1]), c):
                raise ValueError("counts inconsistent with trajectories")
            tr.flags.writeable = False
            object.__setattr__(self, "trajectories", tr)

    @property
    def T(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return self.counts.shape[1]


def occupancy_from_trajectories(traj: np.ndarray, n: int) -> np.ndarray:
    traj = np.asarray(traj, dtype=np.int64)
    k, T = traj.shape
    counts = np.zeros((T, n), dtype=np.int64)
    for row in traj:
        counts[np.arange(T), row] += 1
    return counts


def _cdf_rows(P: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    for s in range(P.shape[0]):
        last = int(np.flatnonzero(P[s] > 0)[-1])
        cdf[s, last:] = np.inf  # uniforms in [cdf[last-1], 1) all land on `last`
    return cdf


def _inverse_cdf(cdf_row: np.ndarray, u) -> np.ndarray:
    return np.searchsorted(cdf_row, u, side="right")


def _walk(cdf: np.ndarray, x0: int, U: np.ndarray) -> np.ndarray:
    """States for steps 1..len(U) given ``x0``; ``U[j]`` drives the j-th move.

    Each uniform defines a map ``f_j: state -> state``. Inside a block the
    prefix compositions ``f_j o ... o f_0`` are built by a doubling scan, so
    the per-step work is vectorised while the result equals the sequential
    recursion exactly.
    """
    n = cdf.shape[0]
    out = np.empty(len(U), dtype=np.int64)
    x = x0
    for a in range(0, len(U), _BLOCK):
        u = U[a : a + _BLOCK]
        G = np.empty((len(u), n), dtype=np.int64)
        for s in range(n):
            G[:, s] = _inverse_cdf(cdf[s], u)
        d = 1
        while d < len(u):
            G[d:] = np.take_along_axis(G[d:], G[:-d], axis=1)
            d *= 2
        out[a : a + len(u)] = G[:, x]
        x = int(out[a + len(u) - 1])
    return out


def walk_reference(P, x0: int, U) -> np.ndarray:
    """Plain sequential recursion; kept as the oracle for :func:`_walk`."""
    cdf = _cdf_rows(np.asarray(P, dtype=float))
    out = []
    x = x0
    for u in U:
        x = int(_inverse_cdf(cdf[x], u))
        out.append(x)
    return np.array(out, dtype=np.int64)


def chain_streams(seed: int, k: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(c)) for c in np.random.SeedSequence(seed).spawn(k)]


def simulate_chains(P, k: int, T: int, seed: int, initial=None) -> OccupancyTrace:
    """Run ``k`` independent chains for ``T`` steps.

    Initial states are drawn from the stationary distribution unless
    ``initial`` (a probability vector) is given.
    """
    P = check_stochastic(P)
    if k < 1 or T < 2:
        raise ValueError("need k >= 1 and T >= 2")
    if not is_irreducible(P):
        raise ValueError("transition matrix is not irreducible")
    n = P.shape[0]
    start = stationary_distribution(P) if initial is None else np.asarray(initial, dtype=float)
    start_cdf = np.cumsum(start)
    start_cdf[int(np.flatnonzero(start > 0)[-1]):] = np.inf
    cdf = _cdf_rows(P)
    traj = np.empty((k, T), dtype=np.int64)
    for i, rng in enumerate(chain_streams(seed, k)):
        U = rng.random(T)
        traj[i, 0] = int(np.searchsorted(start_cdf, U[0], side="right"))
        traj[i, 1:] = _walk(cdf, int(traj[i, 0]), U[1:])
    return OccupancyTrace(k=k, counts=occupancy_from_trajectories(traj, n), trajectories=traj)


def to_time_series(trace: OccupancyTrace) -> tuple[TimeSeries, int]:
    """Binarise occupancy; also return the number of (t, v) cells with >= 2 chains."""
    counts = trace.counts
    collisions = int(np.count_nonzero(counts >= 2))
    return TimeSeries((counts.T >= 1).astype(np.uint8)), collisions


def collision_bound(pi, k: int) -> float:
    """Expected collisions per step under stationarity are at most C(k,2) * sum(pi^2)."""
    pi = np.asarray(pi, dtype=float)
    return k * (k - 1) / 2.0 * float(pi @ pi)
