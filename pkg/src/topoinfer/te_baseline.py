"""Plug-in transfer entropy between binary series.

TE(Y -> X) with target history ``d`` and source history ``l`` (default 1):

    sum p(x', h, y) * log2( p(x' | h, y) / p(x' | h) )

over all windows, where ``h`` is the last ``d`` target values, ``y`` the last
``l`` source values (aligned with the newest history value) and ``x'`` the
next target value. Probabilities are raw window counts, no smoothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, SeriesTooShort


@dataclass(frozen=True)
class TEConfig:
    history_d: int = 5
    source_history: int = 1

    def __post_init__(self):
        if not 1 <= self.history_d <= 16:
            raise ValueError("history_d must be in [1, 16]")
        if not 1 <= self.source_history <= 16:
            raise ValueError("source_history must be in [1, 16]")


def _history_codes(x: np.ndarray, length: int, span: int) -> np.ndarray:
    """Code of ``x[t-length+1..t]`` for ``t = span-1 .. len(x)-2`` (bit j = lag j)."""
    stop = len(x) - 1
    code = np.zeros(stop - span + 1, dtype=np.int64)
    for j in range(length):
        code |= x[span - 1 - j : stop - j].astype(np.int64) << j
    return code


def _check(source, target, d: int, span: int):
    y = np.asarray(source).astype(np.int64).ravel()
    x = np.asarray(target).astype(np.int64).ravel()
    if y.shape != x.shape:
        raise LengthMismatch(f"source has {y.size} samples, target {x.size}")
    if x.size < span + 1:
        raise SeriesTooShort(f"need at least {span + 1} samples, got {x.size}")
    if np.any((x != 0) & (x != 1)) or np.any((y != 0) & (y != 1)):
        raise ValueError("series must be binary")
    return y, x


def _te_from_joint(joint: np.ndarray, windows: int) -> float:
    """``joint[h, y, x']`` window counts -> TE in bits."""
    c_hy = joint.sum(axis=2)
    c_hx = joint.sum(axis=1)
    c_h = c_hx.sum(axis=1)
    terms = []
    for h, y, xn in zip(*np.nonzero(joint)):
        c = int(joint[h, y, xn])
        ratio = (c * int(c_h[h])) / (int(c_hy[h, y]) * int(c_hx[h, xn]))
        terms.append((c / windows) * math.log2(ratio))
    return math.fsum(terms)


def joint_counts(source, target, cfg: TEConfig = TEConfig()) -> tuple[np.ndarray, int]:
    d, l = cfg.history_d, cfg.source_history
    span = max(d, l)
    y, x = _check(source, target, d, span)
    h = _history_codes(x, d, span)
    s = _history_codes(y, l, span)
    nxt = x[span:]
    idx = (h << (l + 1)) | (s << 1) | nxt
    joint = np.bincount(idx, minlength=1 << (d + l + 1)).reshape(1 << d, 1 << l, 2)
    return joint, int(nxt.size)


def transfer_entropy(source, target, cfg: TEConfig = TEConfig()) -> float:
    joint, windows = joint_counts(source, target, cfg)
    return _te_from_joint(joint, windows)


def te_matrix(ts, cfg: TEConfig = TEConfig()) -> np.ndarray:
    """Symmetrised TE matrix: entry (i, j) averages TE(i -> j) and TE(j -> i)."""
    bits = ts.bits if hasattr(ts, "bits") else np.asarray(ts)
    n = bits.shape[0]
    raw = np.zeros((n, n))
    if n == 1:
        return raw
    d, l = cfg.history_d, cfg.source_history
    span = max(d, l)
    _check(bits[0], bits[0], d, span)
    x = bits.astype(np.int64)
    hist = [_history_codes(x[j], d, span) for j in range(n)]
    src = [_history_codes(x[i], l, span) for i in range(n)]
    nxt = [x[j, span:] for j in range(n)]
    size = 1 << (d + l + 1)
    for j in range(n):
        if not nxt[j].any() and not hist[j].any():
            continue  # silent target: TE is exactly zero from every source
        base = (hist[j] << (l + 1)) | nxt[j]
        for i in range(n):
            if i == j:
                continue
            joint = np.bincount(base | (src[i] << 1), minlength=size).reshape(1 << d, 1 << l, 2)
            raw[i, j] = _te_from_joint(joint, nxt[j].size)
    sym = 0.5 * (raw + raw.T)
    np.fill_diagonal(sym, 0.0)
    return sym
