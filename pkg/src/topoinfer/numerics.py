"""Numerical kernels: operator norm, singular-value spectral gap, k-means.

All iterative tolerances live in :data:`TOLERANCES` so the acceptance suite
and the library agree on a single set of numbers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, NoConvergence

TOLERANCES = {
    # singular-value power iteration (change in iterate, inf-norm)
    "svd_tol": 1e-12,
    "svd_max_iter": 100_000,
    # stationary distribution of a stochastic matrix
    "stationary_tol": 1e-12,
    "stationary_max_iter": 100_000,
    # leading left eigenvector of an estimated (possibly non-stochastic) matrix
    "eig_tol": 1e-10,
    "eig_max_iter": 10_000,
    "eig_min_entry": 1e-12,
    # row-stochastic check
    "row_sum_tol": 1e-12,
    # k-means
    "kmeans_restarts": 20,
    "kmeans_max_iter": 500,
    "kmeans_monotone_slack": 1e-9,
}

# fixed start vector stream; results must not depend on global RNG state
_START_SEED = 0x5EED


@dataclass(frozen=True)
class SpectralSummary:
    sigma1: float
    sigma2: float

    @property
    def gap(self) -> float:
        """Spectral gap ``1 - sigma2**2``."""
        return 1.0 - self.sigma2 ** 2


def _start_vector(n: int, level: int = 0) -> np.ndarray:
    v = np.random.default_rng([_START_SEED, level]).random(n) + 0.5
    return v / np.linalg.norm(v)


def _project_out(x: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for b in basis:
        x = x - (b @ x) * b
    return x


def _deflated_start(n: int, basis: list[np.ndarray]) -> np.ndarray | None:
    """Unit start vector orthogonal to ``basis``, or None if the basis spans R^n."""
    if len(basis) >= n:
        return None
    # a fresh vector per level: reusing the first start loses repeated singular values
    x = _project_out(_start_vector(n, len(basis)), basis)
    # the start vector itself may be a singular vector (e.g. A = I)
    if np.linalg.norm(x) < 1e-6:
        cands = [_project_out(e, basis) for e in np.eye(n)]
        x = max(cands, key=np.linalg.norm)
    x = _project_out(x, basis)
    return x / np.linalg.norm(x)


def _psd_power(G: np.ndarray, basis: list[np.ndarray]) -> tuple[float, np.ndarray]:
    """Top eigenpair of a symmetric PSD matrix ``G`` orthogonal to ``basis``."""
    n = G.shape[0]
    tol = TOLERANCES["svd_tol"]
    x = _deflated_start(n, basis)
    if x is None:
        return 0.0, np.zeros(n)
    for _ in range(TOLERANCES["svd_max_iter"]):
        y = G @ x
        for b in basis:
            y -= (b @ y) * b
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, x
        y /= ny
        if np.max(np.abs(y - x)) <= tol:
            x = y
            break
        x = y
    else:
        raise NoConvergence("power iteration on A^T A did not converge")
    # Rayleigh quotient: error is quadratic in the eigenvector error
    return float(max(x @ G @ x, 0.0)), x


def _top_singular(A: np.ndarray, count: int) -> list[float]:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-D array")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    G = A.T @ A
    basis: list[np.ndarray] = []
    values = []
    for _ in range(min(count, A.shape[1])):
        lam, v = _psd_power(G, basis)
        values.append(float(np.sqrt(lam)))
        if lam == 0.0:
            break
        basis.append(v)
    while len(values) < count:
        values.append(0.0)
    return values


def operator_norm(A) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    sigma = _top_singular(A, 1)[0]
    # sigma_1 >= every column 2-norm >= max column norm / sqrt(n)
    lower = np.max(np.linalg.norm(A, axis=0)) / np.sqrt(A.shape[1])
    if sigma + 1e-9 * max(1.0, lower) < lower:
        raise NoConvergence("operator norm below column-norm lower bound")
    return sigma


def spectral_summary(P) -> SpectralSummary:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("spectral_summary needs a square matrix")
    s1, s2 = _top_singular(P, 2)
    return SpectralSummary(sigma1=s1, sigma2=s2)


# ---------------------------------------------------------------- k-means


def _sq_dists(X: np.ndarray, C: np.ndarray, xx: np.ndarray) -> np.ndarray:
    d = xx[:, None] - 2.0 * X @ C.T + np.einsum("ij,ij->i", C, C)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _plusplus(X, xx, k, rng) -> np.ndarray:
    m = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(m)]
    closest = _sq_dists(X, centers[:1], xx)[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            raise DegenerateInput("fewer distinct points than clusters")
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
        idx = min(idx, m - 1)
        while closest[idx] == 0.0:  # guard against landing on a zero-mass point
            idx = (idx + 1) % m
        centers[j] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[j : j + 1], xx)[:, 0])
    return centers


def _inertia(X, labels, centers) -> float:
    diff = X - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _update(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    centers = np.zeros_like(sums)
    filled = counts > 0
    centers[filled] = sums[filled] / counts[filled, None]
    empty = np.flatnonzero(~filled)
    if empty.size:
        # re-seed each empty cluster at the point farthest from its centre
        diff = X - centers[labels]
        resid = np.einsum("ij,ij->i", diff, diff)
        for j in empty:
            far = int(np.argmax(resid))
            centers[j] = X[far]
            resid[far] = -1.0
    return centers


def _lloyd(X, xx, centers, max_iter, trace=None):
    k = centers.shape[0]
    slack = TOLERANCES["kmeans_monotone_slack"]
    labels = np.argmin(_sq_dists(X, centers, xx), axis=1)
    prev = _inertia(X, labels, centers)
    for _ in range(max_iter):
        centers = _update(X, labels, k)
        moved = _inertia(X, labels, centers)
        new_labels = np.argmin(_sq_dists(X, centers, xx), axis=1)
        cur = _inertia(X, new_labels, centers)
        assert moved <= prev + slack * max(1.0, prev), "k-means inertia increased"
        assert cur <= moved + slack * max(1.0, moved), "k-means inertia increased"
        if trace is not None:
            trace.append(cur)
        prev = cur
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels, _inertia(X, labels, centers)


def kmeans(points, k: int, seed: int = 0, restarts: int | None = None,
           max_iter: int | None = None, trace: list | None = None):
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` runs.

    Returns ``(centroids, assignment, inertia)``. Each restart draws from its
    own child of ``SeedSequence(seed)``, so results depend only on ``seed``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.shape[0] < k:
        raise DegenerateInput(f"need at least {k} points, got {X.shape[0]}")
    if np.unique(X, axis=0).shape[0] < k:
        raise DegenerateInput("fewer distinct points than clusters")
    restarts = TOLERANCES["kmeans_restarts"] if restarts is None else restarts
    max_iter = TOLERANCES["kmeans_max_iter"] if max_iter is None else max_iter
    xx = np.einsum("ij,ij->i", X, X)
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.Generator(np.random.PCG64(child))
        init = _plusplus(X, xx, k, rng)
        run_trace = [] if trace is not None else None
        result = _lloyd(X, xx, init, max_iter, run_trace)
        if best is None or result[2] < best[2]:
            best = result
            if trace is not None:
                trace[:] = run_trace
    return best
