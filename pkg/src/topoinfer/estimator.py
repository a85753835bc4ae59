"""Transition-matrix estimation from anonymous occupancy observations.

Counts are accumulated in streaming fashion: the pair count N(u, v) sums
``S[t-1, u] * S[t, v]`` over consecutive steps and the visit count N(u) sums
``S[t, u]`` over every step except the last. From these,

    M      = N(u, v) / N(u)
    Pi_hat = N(v) / (k T)                  (same row repeated)
    P_hat  = M - (k - 1) Pi_hat

and two reweighted link-score matrices built from the leading left
eigenvector ``pi_hat`` of ``P_hat``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoConsecutiveActivity, NonPositivePi, SilentNode
from .numerics import TOLERANCES

log = logging.getLogger(__name__)


@dataclass
class EstimatorState:
    """Streaming sufficient statistics for one observed time series."""

    n: int
    steps_seen: int = 0
    pair_counts: np.ndarray = field(default=None)
    visit_counts: np.ndarray = field(default=None)
    nnz_total: int = 0
    consecutive_active_intervals: int = 0
    _prev: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.pair_counts is None:
            self.pair_counts = np.zeros((self.n, self.n), dtype=np.int64)
        if self.visit_counts is None:
            self.visit_counts = np.zeros(self.n, dtype=np.int64)

    def ingest_step(self, column) -> "EstimatorState":
        """Add one time step of per-node counts (or 0/1 bits)."""
        col = np.asarray(column, dtype=np.int64).ravel()
        if col.shape[0] != self.n:
            raise DimensionMismatch(f"column has {col.shape[0]} entries, expected {self.n}")
        if np.any(col < 0):
            raise ValueError("occupancy counts must be nonnegative")
        active = np.flatnonzero(col)
        if self._prev is not None:
            prev_active = np.flatnonzero(self._prev)
            if prev_active.size and active.size:
                self.pair_counts[np.ix_(prev_active, active)] += np.outer(
                    self._prev[prev_active], col[active])
                self.consecutive_active_intervals += 1
            # the previous step is now known not to be the last one
            self.visit_counts += self._prev
        self.nnz_total += int(active.size)
        self.steps_seen += 1
        self._prev = col
        return self

    def ingest(self, columns) -> "EstimatorState":
        """Batch version of :meth:`ingest_step` over a ``T x n`` array."""
        S = np.asarray(columns, dtype=np.int64)
        if S.ndim != 2 or S.shape[1] != self.n:
            raise DimensionMismatch(f"expected a T x {self.n} array")
        if S.shape[0] == 0:
            return self
        if np.any(S < 0):
            raise ValueError("occupancy counts must be nonnegative")
        if self._prev is not None:
            S_full = np.vstack([self._prev[None, :], S])
        else:
            S_full = S
        self.pair_counts += S_full[:-1].T @ S_full[1:]
        self.visit_counts += S_full[:-1].sum(axis=0)
        act = S_full.any(axis=1)
        self.consecutive_active_intervals += int(np.count_nonzero(act[:-1] & act[1:]))
        self.nnz_total += int(np.count_nonzero(S))
        self.steps_seen += S.shape[0]
        self._prev = S[-1].copy()
        return self

    @classmethod
    def from_counts(cls, counts) -> "EstimatorState":
        """State from a full ``T x n`` occupancy matrix."""
        S = np.asarray(counts)
        return cls(n=S.shape[1]).ingest(S)

    @classmethod
    def from_time_series(cls, ts) -> "EstimatorState":
        bits = ts.bits if hasattr(ts, "bits") else np.asarray(ts)
        return cls(n=bits.shape[0]).ingest(bits.T)


def estimate_k(state: EstimatorState) -> float:
    """Concurrency heuristic: nonzero cells per consecutively-active interval pair."""
    if state.consecutive_active_intervals == 0:
        raise NoConsecutiveActivity("no two consecutive intervals both have activity")
    return max(state.nnz_total / state.consecutive_active_intervals, 1.0)


@dataclass(frozen=True)
class EstimateBundle:
    M: np.ndarray
    Pi_hat: np.ndarray
    P_hat: np.ndarray
    pi_hat: np.ndarray
    L_hat: np.ndarray
    L_sym: np.ndarray
    k_used: float
    T: int
    silent_nodes: tuple[int, ...] = ()
    pi_fallback: bool = False

    @property
    def n(self) -> int:
        return self.P_hat.shape[0]

    def matrices(self) -> dict[str, np.ndarray]:
        return {"M": self.M, "P_hat": self.P_hat, "L_hat": self.L_hat, "L_sym": self.L_sym}


def leading_left_eigenvector(A: np.ndarray, start: np.ndarray) -> np.ndarray | None:
    """Power iteration for the leading left eigenvector, normalised to sum 1.

    Iterates ``(I + A^T) / 2`` so that an eigenvalue near -1 (periodic
    observation patterns) does not stall convergence. Returns ``None`` when
    the iteration fails or produces an entry at or below the positivity floor.
    """
    n = A.shape[0]
    step = 0.5 * (np.eye(n) + A.T)
    x = np.asarray(start, dtype=float)
    total = x.sum()
    if not np.isfinite(total) or total <= 0:
        return None
    x = x / total
    for _ in range(TOLERANCES["eig_max_iter"]):
        y = step @ x
        s = y.sum()
        if not np.isfinite(s) or s == 0.0:
            return None
        y /= s
        if np.max(np.abs(y - x)) <= TOLERANCES["eig_tol"]:
            if np.min(y) <= TOLERANCES["eig_min_entry"]:
                return None
            return y
        x = y
    return None


def _reweight(P_hat: np.ndarray, pi_hat: np.ndarray, symmetric: bool) -> np.ndarray:
    root = np.sqrt(pi_hat)
    W = root[None, :] / root[:, None]
    base = 0.5 * (P_hat + P_hat.T) if symmetric else P_hat
    return W * base


def laplacian(P_hat, pi_hat) -> np.ndarray:
    """``L(u, v) = sqrt(pi(v) / pi(u)) * P(u, v)``."""
    pi_hat = np.asarray(pi_hat, dtype=float)
    if np.any(pi_hat <= 0):
        raise NonPositivePi(f"pi_hat has non-positive entries at {np.flatnonzero(pi_hat <= 0).tolist()}")
    return _reweight(np.asarray(P_hat, dtype=float), pi_hat, symmetric=False)


def symmetric_laplacian(P_hat, pi_hat) -> np.ndarray:
    """Symmetrised Laplacian estimate.

    Entry ``(u, v)`` with ``u < v`` is ``sqrt(pi(v)/pi(u)) * (P(u,v) + P(v,u)) / 2``;
    the lower triangle mirrors the upper one so the result is exactly
    symmetric (the raw expression is symmetric only for uniform ``pi_hat``).
    """
    pi_hat = np.asarray(pi_hat, dtype=float)
    if np.any(pi_hat <= 0):
        raise NonPositivePi(f"pi_hat has non-positive entries at {np.flatnonzero(pi_hat <= 0).tolist()}")
    L = _reweight(np.asarray(P_hat, dtype=float), pi_hat, symmetric=True)
    upper = np.triu(L, 1)
    return upper + upper.T + np.diag(np.diag(L))


laplacian_symmetry_note = symmetric_laplacian


def finalize(state: EstimatorState, k: float | None = None, strict: bool = False) -> EstimateBundle:
    """Turn streaming counts into the full estimate bundle.

    ``k`` overrides the concurrency heuristic. Nodes never observed before the
    last step get zero rows in ``M`` and zero rows/columns in both Laplacian
    estimates; with ``strict=True`` they raise :class:`SilentNode` instead.
    """
    if state.steps_seen < 2:
        raise ValueError("need at least two observed steps")
    k_used = float(estimate_k(state) if k is None else k)
    if k_used <= 0:
        raise ValueError("k must be positive")
    n, T = state.n, state.steps_seen
    Nuv = state.pair_counts.astype(float)
    Nu = state.visit_counts.astype(float)
    silent = tuple(int(u) for u in np.flatnonzero(Nu == 0))
    if silent:
        if strict:
            raise SilentNode(silent)
        log.info("silent nodes (no transmissions before last step): %s", list(silent))
    alive = Nu > 0
    M = np.zeros((n, n))
    M[alive] = Nuv[alive] / Nu[alive, None]
    freq = Nu / (k_used * T)
    Pi_hat = np.tile(freq, (n, 1))
    P_hat = M - (k_used - 1.0) * Pi_hat

    fallback = False
    pi_hat = np.zeros(n)
    if np.any(alive):
        idx = np.flatnonzero(alive)
        sub = P_hat[np.ix_(idx, idx)]
        vec = leading_left_eigenvector(sub, Nu[idx])
        if vec is None:
            fallback = True
            log.info("eigenvector iteration failed; using empirical frequencies")
            pi_hat[idx] = freq[idx]
        else:
            pi_hat[idx] = vec
        L_hat = np.zeros((n, n))
        L_sym = np.zeros((n, n))
        L_hat[np.ix_(idx, idx)] = laplacian(sub, pi_hat[idx])
        L_sym[np.ix_(idx, idx)] = symmetric_laplacian(sub, pi_hat[idx])
    else:
        L_hat = np.zeros((n, n))
        L_sym = np.zeros((n, n))
    return EstimateBundle(M=M, Pi_hat=Pi_hat, P_hat=P_hat, pi_hat=pi_hat, L_hat=L_hat,
                          L_sym=L_sym, k_used=k_used, T=T, silent_nodes=silent,
                          pi_fallback=fallback)


def estimate(data, k: float | None = None, strict: bool = False) -> EstimateBundle:
    """Convenience wrapper: time series or ``T x n`` occupancy counts -> bundle."""
    if hasattr(data, "bits"):
        state = EstimatorState.from_time_series(data)
    elif hasattr(data, "counts"):
        state = EstimatorState.from_counts(data.counts)
    else:
        state = EstimatorState.from_counts(data)
    return finalize(state, k=k, strict=strict)
