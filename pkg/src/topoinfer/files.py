"""CSV/JSON readers and writers for the on-disk formats."""
from __future__ import annotations

import csv
import json

import numpy as np

from .estimator import EstimateBundle
from .markov_sim import OccupancyTrace, TimeSeries


def write_matrix(A, path) -> None:
    """Row-major CSV, shortest round-trip float repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(np.asarray(A, dtype=float)):
            w.writerow([repr(float(x)) for x in row])


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(x) for x in r] for r in csv.reader(fh) if r]
    return np.array(rows, dtype=float)


def write_vector(v, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for x in np.asarray(v, dtype=float):
            w.writerow([repr(float(x))])


def _write_node_rows(rows, T: int, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([T])
        for row in rows:
            w.writerow([int(x) for x in row])


def _read_node_rows(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        T = int(header[0])
        rows = [[int(x) for x in r] for r in reader if r]
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), -1)
    if arr.shape[1] != T:
        raise ValueError(f"header says T={T} but rows have {arr.shape[1]} columns")
    return arr


def write_time_series(ts: TimeSeries, path) -> None:
    """One row of 0/1 per node, preceded by a header row holding T."""
    _write_node_rows(ts.bits, ts.T, path)


def read_time_series(path) -> TimeSeries:
    return TimeSeries(_read_node_rows(path))


def write_occupancy(trace: OccupancyTrace, path) -> None:
    """Same layout as the time series, with integer counts."""
    _write_node_rows(trace.counts.T, trace.T, path)


def read_occupancy(path) -> OccupancyTrace:
    counts = _read_node_rows(path).T
    return OccupancyTrace(k=int(counts[0].sum()), counts=counts)


def write_bundle(bundle: EstimateBundle, out_dir) -> dict:
    paths = {}
    for name, mat in bundle.matrices().items():
        paths[name] = out_dir / f"{name}.csv"
        write_matrix(mat, paths[name])
    paths["pi_hat"] = out_dir / "pi_hat.csv"
    write_vector(bundle.pi_hat, paths["pi_hat"])
    side = {"k_used": bundle.k_used, "T": bundle.T, "n": bundle.n,
            "silent_nodes": list(bundle.silent_nodes), "pi_fallback": bundle.pi_fallback}
    paths["bundle"] = out_dir / "bundle.json"
    with open(paths["bundle"], "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
