"""
poissonet.graph - Network post-processing.

Components, centralities and the benchmark's TPR/FPR scoring. Adjacency
matrices are 0/1 with adj[i, j] == 1 meaning the directed edge i -> j.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple, TypedDict

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

EIGENVECTOR_TOL = 1e-10
EIGENVECTOR_MAX_ITER = 100_000
DEFAULT_TOP = 20
MEASURES = ("out_degree", "betweenness", "eigenvector")


class GraphError(ValueError):
    """Raised for invalid adjacency matrices or undefined metrics."""


class CentralityConvergenceError(Exception):
    """Raised when power iteration does not converge within the iteration cap."""


class NodeCentrality(TypedDict):
    label: str
    out_degree: int
    betweenness: float
    eigenvector: Optional[float]


class CentralityReport(TypedDict):
    nodes: List[NodeCentrality]
    rankings: Dict[str, List[str]]
    top: Dict[str, List[Dict[str, object]]]
    eigenvector_error: Optional[str]


def _check(adj: np.ndarray) -> np.ndarray:
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {adj.shape}")
    if not np.all((adj == 0) | (adj == 1)):
        raise GraphError("adjacency entries must be 0 or 1")
    if np.any(np.diag(adj) != 0):
        raise GraphError("adjacency must not contain self-loops")
    return adj.astype(np.int8)


def to_digraph(adj: np.ndarray) -> nx.DiGraph:
    """Directed networkx graph over nodes 0..n-1."""
    adj = _check(adj)
    graph = nx.from_numpy_array(adj, create_using=nx.DiGraph)
    graph.add_nodes_from(range(adj.shape[0]))
    return graph


def weakly_connected_components(adj: np.ndarray) -> List[Set[int]]:
    """
    Components of the underlying undirected graph.

    Sorted by size descending; equal sizes are ordered by smallest node.
    """
    graph = to_digraph(adj)
    components = [set(c) for c in nx.weakly_connected_components(graph)]
    return sorted(components, key=lambda c: (-len(c), min(c)))


def out_degree(adj: np.ndarray) -> np.ndarray:
    return _check(adj).sum(axis=1).astype(int)


def betweenness(adj: np.ndarray) -> np.ndarray:
    """Exact unnormalized directed betweenness (Brandes accumulation)."""
    graph = to_digraph(adj)
    scores = nx.betweenness_centrality(graph, normalized=False)
    return np.array([scores[v] for v in range(graph.number_of_nodes())], dtype=float)


def eigenvector_centrality(
    adj: np.ndarray,
    tol: float = EIGENVECTOR_TOL,
    max_iter: int = EIGENVECTOR_MAX_ITER,
) -> np.ndarray:
    """
    Out-influence eigenvector centrality on the largest weakly connected component.

    Scores accrue to nodes that point at high-scoring nodes (power iteration
    on the out-edges of the LWCC), normalized so the largest score is 1.
    Nodes outside the LWCC score 0.

    Raises:
        GraphError: If the LWCC has no edges
        CentralityConvergenceError: If power iteration needs more than max_iter steps
    """
    graph = to_digraph(adj)
    lwcc = weakly_connected_components(adj)[0]
    sub = graph.subgraph(lwcc)
    if sub.number_of_edges() == 0:
        raise GraphError("largest weakly connected component has no edges")
    try:
        # networkx scores by in-edges; reversing turns that into out-influence.
        scores = nx.eigenvector_centrality(sub.reverse(copy=True), max_iter=max_iter, tol=tol)
    except nx.PowerIterationFailedConvergence as e:
        raise CentralityConvergenceError(
            f"eigenvector centrality did not converge within {max_iter} iterations"
        ) from e
    out = np.zeros(graph.number_of_nodes())
    for node, value in scores.items():
        out[node] = abs(value)
    return out / out.max()


def _edge_set(adj: np.ndarray, undirected: bool) -> Set[Tuple[int, int]]:
    if undirected:
        sym = (adj | adj.T).astype(bool)
        rows, cols = np.nonzero(np.triu(sym, k=1))
    else:
        rows, cols = np.nonzero(adj)
    return set(zip(rows.tolist(), cols.tolist()))


def tpr_fpr(
    true_adj: np.ndarray, est_adj: np.ndarray, undirected: bool = False
) -> Tuple[float, float]:
    """
    True- and false-positive rates, both relative to the true edge count.

    TPR = |E & E_hat| / |E| and FPR = |E_hat - E| / |E|, so FPR may exceed 1.
    With undirected=True both graphs are compared as unordered pairs: a true
    edge counts as found if it was inferred in either direction.

    Raises:
        GraphError: If the shapes differ or the truth has no edges
    """
    true_adj = _check(true_adj)
    est_adj = _check(est_adj)
    if true_adj.shape != est_adj.shape:
        raise GraphError(
            f"adjacency shapes differ: {true_adj.shape} vs {est_adj.shape}"
        )
    truth = _edge_set(true_adj, undirected)
    estimate = _edge_set(est_adj, undirected)
    if not truth:
        raise GraphError("true graph has no edges; TPR and FPR are undefined")
    return len(truth & estimate) / len(truth), len(estimate - truth) / len(truth)


def _ranking(values: np.ndarray) -> List[int]:
    # Descending score, ascending index on ties.
    return sorted(range(values.size), key=lambda i: (-values[i], i))


def centrality_report(
    adj: np.ndarray, labels: Sequence[str], top: int = DEFAULT_TOP
) -> CentralityReport:
    """
    Per-node out degree, betweenness and eigenvector centrality with top-k tables.

    An eigenvector failure (edgeless LWCC or non-convergence) is recorded in
    eigenvector_error and leaves the eigenvector scores null.
    """
    adj = _check(adj)
    labels = list(labels)
    if len(labels) != adj.shape[0]:
        raise GraphError(f"{len(labels)} labels for {adj.shape[0]} nodes")

    measures: Dict[str, Optional[np.ndarray]] = {
        "out_degree": out_degree(adj).astype(float),
        "betweenness": betweenness(adj),
    }
    eigen_error = None
    try:
        measures["eigenvector"] = eigenvector_centrality(adj)
    except (GraphError, CentralityConvergenceError) as e:
        logger.warning(f"Eigenvector centrality unavailable: {e}")
        measures["eigenvector"] = None
        eigen_error = str(e)

    nodes: List[NodeCentrality] = []
    for i, label in enumerate(labels):
        eigen = measures["eigenvector"]
        nodes.append(
            NodeCentrality(
                label=label,
                out_degree=int(measures["out_degree"][i]),
                betweenness=float(measures["betweenness"][i]),
                eigenvector=None if eigen is None else float(eigen[i]),
            )
        )

    rankings: Dict[str, List[str]] = {}
    tables: Dict[str, List[Dict[str, object]]] = {}
    for name in MEASURES:
        values = measures[name]
        if values is None:
            rankings[name] = []
            tables[name] = []
            continue
        order = _ranking(values)
        rankings[name] = [labels[i] for i in order]
        tables[name] = [
            {"rank": rank, "label": labels[i], "value": float(values[i])}
            for rank, i in enumerate(order[:top], start=1)
        ]
    return CentralityReport(
        nodes=nodes, rankings=rankings, top=tables, eigenvector_error=eigen_error
    )
