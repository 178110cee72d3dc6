"""
poissonet.benchmark - TPR/FPR benchmarks on simulated Erdos-Renyi networks.

For every grid cell (n, p, t) and realization r a graph is drawn from a
stream keyed by (seed, n, p index, r), shared by all sample sizes, and data
from a stream keyed additionally by t. Every method sees the same data.
Realizations whose true graph has no edges are excluded from the cell; a
cell left with no realizations is reported as an error row instead of a
result row.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, TypedDict, Union

import numpy as np

from .graph import tpr_fpr
from .omii import ESTIMATORS, InferenceConfig, infer_network
from .sim import DATA_STREAM, GRAPH_STREAM, SimConfig, er_graph, simulate
from .stats import make_rng

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RESULT_HEADER = (
    "method", "n", "p", "t", "tpr_mean", "tpr_se", "fpr_mean", "fpr_se", "realizations",
)
ERROR_HEADER = ("method", "n", "p", "t", "error")


class BenchmarkConfigError(ValueError):
    """Raised for an empty or invalid benchmark grid."""


@dataclass(frozen=True)
class BenchmarkGrid:
    """Grid of simulation cells, methods and shared inference settings."""

    nodes: Tuple[int, ...] = (50,)
    p: Tuple[float, ...] = (0.04, 0.1)
    samples: Tuple[int, ...] = (100, 250, 500, 1000)
    methods: Tuple[str, ...] = ESTIMATORS
    realizations: int = 50
    seed: int = 0
    edge_rate: float = 1.0
    base_rate: float = 1.0
    noise_rate: float = 0.5
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    workers: int = 1

    def __post_init__(self):
        for name in ("nodes", "p", "samples", "methods"):
            values = tuple(getattr(self, name))
            if not values:
                raise BenchmarkConfigError(f"benchmark grid needs at least one {name} value")
            object.__setattr__(self, name, values)
        unknown = [m for m in self.methods if m not in ESTIMATORS]
        if unknown:
            raise BenchmarkConfigError(f"unknown methods: {unknown}")
        if self.realizations < 1:
            raise BenchmarkConfigError(f"realizations must be >= 1, got {self.realizations}")
        if self.workers < 1:
            raise BenchmarkConfigError(f"workers must be >= 1, got {self.workers}")


class BenchmarkRow(TypedDict):
    method: str
    n: int
    p: float
    t: int
    tpr_mean: float
    tpr_se: float
    fpr_mean: float
    fpr_se: float
    realizations: int


class BenchmarkErrorRow(TypedDict):
    method: str
    n: int
    p: float
    t: int
    error: str


@dataclass
class BenchmarkReport:
    rows: List[BenchmarkRow]
    errors: List[BenchmarkErrorRow]

    def write(self, path: PathLike, errors_path: Optional[PathLike] = None) -> None:
        """Write the result CSV and, if given, the error CSV (header only when empty)."""
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(RESULT_HEADER)
            for row in self.rows:
                writer.writerow(
                    [
                        row["method"],
                        row["n"],
                        f"{row['p']:g}",
                        row["t"],
                        f"{row['tpr_mean']:.6f}",
                        f"{row['tpr_se']:.6f}",
                        f"{row['fpr_mean']:.6f}",
                        f"{row['fpr_se']:.6f}",
                        row["realizations"],
                    ]
                )
        if errors_path is None:
            return
        with open(errors_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(ERROR_HEADER)
            for row in self.errors:
                writer.writerow([row["method"], row["n"], f"{row['p']:g}", row["t"], row["error"]])


# (n, p index, p, realization, t)
_Task = Tuple[int, int, float, int, int]
# method -> (tpr, fpr), or None when the true graph has no edges
_Score = Optional[Dict[str, Tuple[float, float]]]


def _run_realization(args: Tuple[BenchmarkGrid, _Task]) -> Tuple[_Task, _Score]:
    grid, task = args
    n, p_index, p, r, t = task
    adj = er_graph(n, p, make_rng(grid.seed, GRAPH_STREAM, n, p_index, r))
    if not adj.any():
        return task, None
    sim_config = SimConfig(
        n_nodes=n,
        n_samples=t,
        er_p=p,
        edge_rate=grid.edge_rate,
        base_rate=grid.base_rate,
        noise_rate=grid.noise_rate,
        seed=grid.seed,
    )
    counts = simulate(sim_config, adj, make_rng(grid.seed, DATA_STREAM, n, p_index, r, t))
    scores = {}
    for method in grid.methods:
        config = replace(grid.inference, estimator=method, workers=1)
        result = infer_network(counts, config)
        scores[method] = tpr_fpr(adj, result.adjacency, undirected=True)
    logger.debug(f"Realization n={n} p={p} t={t} r={r}: {scores}")
    return task, scores


def _standard_error(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def run_benchmark(grid: BenchmarkGrid) -> BenchmarkReport:
    """
    Simulate, infer with every method and aggregate TPR/FPR per cell.

    Scoring matches the undirected truth: a true edge is found if it was
    inferred in either direction. Realizations run in a multiprocessing pool
    when grid.workers > 1; the report is identical to a serial run.
    """
    tasks: List[_Task] = [
        (n, p_index, p, r, t)
        for n in grid.nodes
        for p_index, p in enumerate(grid.p)
        for t in grid.samples
        for r in range(grid.realizations)
    ]
    logger.info(
        f"Benchmark: {len(tasks)} realizations x {len(grid.methods)} methods "
        f"(workers={grid.workers})"
    )
    jobs = [(grid, task) for task in tasks]
    if grid.workers > 1:
        with Pool(processes=grid.workers) as pool:
            outcomes = pool.map(_run_realization, jobs, chunksize=1)
    else:
        outcomes = [_run_realization(job) for job in jobs]

    collected: Dict[Tuple[str, int, int, int], List[Tuple[float, float]]] = {}
    for (n, p_index, _p, _r, t), scores in sorted(outcomes, key=lambda item: item[0]):
        for method in grid.methods:
            bucket = collected.setdefault((method, n, p_index, t), [])
            if scores is not None:
                bucket.append(scores[method])

    rows: List[BenchmarkRow] = []
    errors: List[BenchmarkErrorRow] = []
    for method in grid.methods:
        for n in grid.nodes:
            for p_index, p in enumerate(grid.p):
                for t in grid.samples:
                    scores = collected[(method, n, p_index, t)]
                    if not scores:
                        message = "no realization has a true edge; TPR and FPR are undefined"
                        logger.warning(f"Cell method={method} n={n} p={p} t={t}: {message}")
                        errors.append(BenchmarkErrorRow(method=method, n=n, p=p, t=t, error=message))
                        continue
                    tprs = [s[0] for s in scores]
                    fprs = [s[1] for s in scores]
                    rows.append(
                        BenchmarkRow(
                            method=method,
                            n=n,
                            p=p,
                            t=t,
                            tpr_mean=float(np.mean(tprs)),
                            tpr_se=_standard_error(tprs),
                            fpr_mean=float(np.mean(fprs)),
                            fpr_se=_standard_error(fprs),
                            realizations=len(scores),
                        )
                    )
    return BenchmarkReport(rows, errors)


def grid_from_settings(settings: Mapping[str, Any], inference: InferenceConfig) -> BenchmarkGrid:
    return BenchmarkGrid(
        nodes=tuple(settings["grid_nodes"]),
        p=tuple(float(p) for p in settings["grid_p"]),
        samples=tuple(settings["grid_samples"]),
        methods=tuple(settings["methods"]),
        realizations=int(settings["realizations"]),
        seed=int(settings["seed"]),
        edge_rate=float(settings["edge_rate"]),
        base_rate=float(settings["base_rate"]),
        noise_rate=float(settings["noise_rate"]),
        inference=replace(inference, workers=1),
        workers=int(settings["workers"]),
    )
