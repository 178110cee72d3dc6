"""
poissonet.sim - Ground-truth networks and multivariate Poisson count data.

Counts follow X = B Y + E: every variable owns a private Poisson stream,
every edge (i, j) owns a shared stream added to both endpoints, and E is
independent Poisson noise per variable and sample. The resulting covariance
is the rate structure itself: var(x_i) = l_ii + sum_j l_ij + noise and
cov(x_i, x_j) = l_ij.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .counts import CountMatrix
from .stats import make_rng

logger = logging.getLogger(__name__)

# Substream keys so graph and data draws never share a stream.
GRAPH_STREAM = 1
DATA_STREAM = 2


class SimulationConfigError(ValueError):
    """Raised for invalid simulation parameters or adjacency matrices."""


@dataclass(frozen=True)
class SimConfig:
    """Benchmark protocol parameters (defaults: high-SNR scenario)."""

    n_nodes: int
    n_samples: int
    er_p: float = 0.04
    edge_rate: float = 1.0
    base_rate: float = 1.0
    noise_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise SimulationConfigError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if self.n_samples < 1:
            raise SimulationConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0.0 <= self.er_p <= 1.0:
            raise SimulationConfigError(f"er_p must lie in [0, 1], got {self.er_p}")
        for name in ("edge_rate", "base_rate", "noise_rate"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise SimulationConfigError(f"{name} must be non-negative, got {value}")


def pair_columns(n: int) -> List[Tuple[int, int]]:
    """Pair-column ordering (0,1), (0,2), ..., (n-2, n-1)."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _check_adjacency(adj: np.ndarray, symmetric: bool = True) -> np.ndarray:
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise SimulationConfigError(f"adjacency must be square, got {adj.shape}")
    if not np.all((adj == 0) | (adj == 1)):
        raise SimulationConfigError("adjacency entries must be 0 or 1")
    if np.any(np.diag(adj) != 0):
        raise SimulationConfigError("adjacency must have a zero diagonal")
    if symmetric and not np.array_equal(adj, adj.T):
        raise SimulationConfigError("adjacency must be symmetric")
    return adj.astype(np.int8)


def er_graph(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """
    Undirected Erdos-Renyi graph as a symmetric 0/1 adjacency.

    Each unordered pair is an edge independently with probability p.
    """
    if n < 2:
        raise SimulationConfigError(f"n must be >= 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise SimulationConfigError(f"p must lie in [0, 1], got {p}")
    rows, cols = np.triu_indices(n, k=1)
    present = rng.random(rows.size) < p
    adj = np.zeros((n, n), dtype=np.int8)
    adj[rows[present], cols[present]] = 1
    adj[cols[present], rows[present]] = 1
    return adj


def build_mixing(adj: np.ndarray) -> np.ndarray:
    """
    Mixing matrix B = [I_n | pair columns].

    The column for pair (i, j) is e_i + e_j when the pair is an edge and
    the zero column otherwise, so B always has n + n(n-1)/2 columns.
    """
    adj = _check_adjacency(adj)
    n = adj.shape[0]
    pairs = pair_columns(n)
    mixing = np.zeros((n, n + len(pairs)), dtype=np.int64)
    mixing[:, :n] = np.eye(n, dtype=np.int64)
    for column, (i, j) in enumerate(pairs, start=n):
        if adj[i, j]:
            mixing[i, column] = 1
            mixing[j, column] = 1
    return mixing


def truth_edges(adj: np.ndarray) -> List[Tuple[int, int]]:
    """Undirected edges (i, j), i < j, in pair-column order."""
    adj = _check_adjacency(adj)
    return [(i, j) for i, j in pair_columns(adj.shape[0]) if adj[i, j]]


def simulate(
    config: SimConfig, adj: np.ndarray, rng: Optional[np.random.Generator] = None
) -> CountMatrix:
    """
    Draw t samples of X = B Y + E for the given graph.

    Private streams have rate base_rate, edge streams edge_rate, noise
    noise_rate. Without an explicit generator the data substream of
    config.seed is used, so identical (config, adj) give identical counts.
    """
    adj = _check_adjacency(adj)
    n = adj.shape[0]
    if n != config.n_nodes:
        raise SimulationConfigError(
            f"adjacency has {n} nodes but config expects {config.n_nodes}"
        )
    if rng is None:
        rng = make_rng(config.seed, DATA_STREAM)

    mixing = build_mixing(adj)
    latent_rates = np.zeros(mixing.shape[1])
    latent_rates[:n] = config.base_rate
    latent_rates[n:] = config.edge_rate * (mixing[:, n:].sum(axis=0) > 0)

    t = config.n_samples
    latent = rng.poisson(latent_rates[:, np.newaxis], size=(latent_rates.size, t))
    noise = rng.poisson(config.noise_rate, size=(n, t))
    values = mixing @ latent + noise
    logger.debug(
        f"Simulated {n} variables x {t} samples over {len(truth_edges(adj))} edges"
    )
    return CountMatrix(values, tuple(str(i + 1) for i in range(n)))


def simulate_network(config: SimConfig) -> Tuple[np.ndarray, CountMatrix]:
    """Draw an ER graph from the config's graph substream, then its counts."""
    adj = er_graph(config.n_nodes, config.er_p, make_rng(config.seed, GRAPH_STREAM))
    return adj, simulate(config, adj)
