"""Wireless network topology inference from anonymous transmission times."""
from .estimator import EstimateBundle, EstimatorState, estimate, estimate_k, finalize
from .harness import EvalReport, sweep, top_m_score
from .markov_sim import OccupancyTrace, TimeSeries, simulate_chains, to_time_series
from .numerics import SpectralSummary, kmeans, operator_norm, spectral_summary
from .te_baseline import TEConfig, te_matrix, transfer_entropy
from .topology import Topology, from_positions, random_walk_matrix, stationary_distribution

__version__ = "0.1.0"
