"""
poissonet.pipeline - Batch runs: preprocessing, inference and simulation artifacts.

Preprocessing order is filter -> scale -> screen:

- rows with total count <= min_count are dropped (strict >)
- optional scaling replaces each row by floor(x / mean(x))
- optional goodness-of-fit screening flags rows but never drops them
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from . import graph
from .benchmark import grid_from_settings, run_benchmark
from .config import save_settings
from .counts import CountMatrix, load_counts, save_counts
from .omii import InferenceConfig, InferenceResult, infer_network
from .sim import SimConfig, simulate_network, truth_edges
from .stats import GoodnessOfFitError, ks_test_negbin, ks_test_poisson, make_rng, stable_key

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCREEN_METHODS = ("none", "poisson", "negbin")
SCREEN_STREAM = 3
PREPROCESS_ORDER = ("filter", "scale", "screen")
EDGE_HEADER = ("source", "target", "cmi_nats", "p_value", "order_added")
TOP_K = 20


class PipelineError(ValueError):
    """Raised when a batch run cannot proceed with the given inputs."""


def inference_config_from_settings(
    settings: Mapping[str, Any], estimator: Optional[str] = None, workers: Optional[int] = None
) -> InferenceConfig:
    """Build an InferenceConfig from resolved settings (max_parents 0 means no cap)."""
    return InferenceConfig(
        estimator=estimator or settings["estimator"],
        alpha=float(settings["alpha"]),
        n_shuffles=int(settings["shuffles"]),
        lag=int(settings["lag"]),
        max_parents=int(settings["max_parents"]) or None,
        seed=int(settings["seed"]),
        workers=int(workers if workers is not None else settings["workers"]),
        box_cox_gamma=settings.get("box_cox_gamma"),
        tail_mass=float(settings["tail_mass"]),
        forward_null=settings["forward_null"],
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of one `infer` run."""

    input_path: Path
    output_dir: Path
    inference: InferenceConfig
    min_total_count: int = 100
    scale: bool = False
    screen: str = "none"
    n_boot: int = 200
    settings: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.min_total_count < 0:
            raise PipelineError(f"min_total_count must be >= 0, got {self.min_total_count}")
        if self.screen not in SCREEN_METHODS:
            raise PipelineError(
                f"screen must be one of {SCREEN_METHODS}, got {self.screen!r}"
            )

    @property
    def seed(self) -> int:
        return self.inference.seed

    @classmethod
    def from_settings(
        cls, settings: Mapping[str, Any], input_path: PathLike, output_dir: PathLike
    ) -> "PipelineConfig":
        return cls(
            input_path=Path(input_path),
            output_dir=Path(output_dir),
            inference=inference_config_from_settings(settings),
            min_total_count=int(settings["min_count"]),
            scale=bool(settings["scale"]),
            screen=settings["screen"],
            n_boot=int(settings["n_boot"]),
            settings=dict(settings),
        )


@dataclass
class PreprocessResult:
    counts: CountMatrix
    dropped: List[str]
    screening: List[Dict[str, Any]]

    def screening_summary(self, method: str, alpha: float) -> Dict[str, Any]:
        flagged = [row["label"] for row in self.screening if not row.get("passed", False)]
        return {
            "method": method,
            "alpha": alpha,
            "rows": len(self.screening),
            "passed": len(self.screening) - len(flagged),
            "flagged": flagged,
            "results": self.screening,
        }


def scale_rows(counts: CountMatrix) -> CountMatrix:
    """Replace each row by floor(x / mean(x)); all-zero rows stay zero."""
    values = counts.values.astype(float)
    means = values.mean(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(means > 0, np.floor(values / means), 0.0)
    return counts.with_values(scaled.astype(np.int64))


def screen_rows(
    counts: CountMatrix, method: str, seed: int, n_boot: int, alpha: float
) -> List[Dict[str, Any]]:
    """Goodness-of-fit result per row; rows that cannot be tested carry an error."""
    test = ks_test_poisson if method == "poisson" else ks_test_negbin
    results = []
    for i, label in enumerate(counts.labels):
        rng = make_rng(seed, stable_key(label), SCREEN_STREAM)
        try:
            gof = test(counts.values[i], rng, n_boot=n_boot)
        except GoodnessOfFitError as e:
            logger.warning(f"Screening skipped row {label}: {e}")
            results.append({"label": label, "passed": False, "error": str(e)})
            continue
        entry = {"label": label, "passed": gof.passed(alpha)}
        entry.update(gof.to_dict())
        results.append(entry)
    return results


def preprocess(counts: CountMatrix, config: PipelineConfig) -> PreprocessResult:
    """
    Filter, scale and screen a count matrix.

    The number of samples never changes.

    Raises:
        PipelineError: If every row is filtered out
    """
    mask = counts.totals() > config.min_total_count
    keep = np.flatnonzero(mask)
    dropped = [label for label, kept in zip(counts.labels, mask) if not kept]
    if keep.size == 0:
        raise PipelineError(
            f"all {counts.n_variables} rows have total count <= {config.min_total_count}"
        )
    filtered = counts.take(keep)
    if dropped:
        logger.info(f"Dropped {len(dropped)} rows with total <= {config.min_total_count}")

    if config.scale:
        filtered = scale_rows(filtered)

    screening: List[Dict[str, Any]] = []
    if config.screen != "none":
        screening = screen_rows(
            filtered, config.screen, config.seed, config.n_boot, config.inference.alpha
        )
        flagged = sum(1 for row in screening if not row["passed"])
        logger.info(f"Screening ({config.screen}) flagged {flagged} of {len(screening)} rows")
    return PreprocessResult(filtered, dropped, screening)


def write_edges(result: InferenceResult, path: PathLike) -> None:
    """Edge list CSV sorted by target, then the order in which parents were added."""
    rows = sorted(result.edges, key=lambda e: (e["target"], e["order_added"]))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EDGE_HEADER)
        for edge in rows:
            writer.writerow(
                [
                    result.labels[edge["source"]],
                    result.labels[edge["target"]],
                    f"{edge['cmi']:.6g}",
                    f"{edge['p_value']:.6g}",
                    edge["order_added"],
                ]
            )


def _write_json(data: Mapping[str, Any], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True)
class RunOutputs:
    output_dir: Path
    files: Dict[str, Path]


def run_infer(config: PipelineConfig) -> RunOutputs:
    """
    Load, preprocess, infer and write edges.csv, report.json and run_config.toml.

    Identical inputs and seed give byte-identical files.
    """
    counts = load_counts(config.input_path)
    prepared = preprocess(counts, config)
    result = infer_network(prepared.counts, config.inference)

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    edges_path = out / "edges.csv"
    write_edges(result, edges_path)

    components = graph.weakly_connected_components(result.adjacency)
    report = {
        "config": {
            **config.settings,
            "input": str(config.input_path),
        },
        "seed": config.seed,
        "preprocessing": {
            "order": list(PREPROCESS_ORDER),
            "rows_in": counts.n_variables,
            "rows_kept": prepared.counts.n_variables,
            "dropped": prepared.dropped,
            "scaled": config.scale,
            "samples": counts.n_samples,
        },
        "screening": prepared.screening_summary(config.screen, config.inference.alpha),
        "n_edges": len(result.edges),
        "components": [len(c) for c in components],
        "centrality": graph.centrality_report(
            result.adjacency, prepared.counts.labels, top=TOP_K
        ),
    }
    report_path = out / "report.json"
    _write_json(report, report_path)
    config_path = save_settings(config.settings, out / "run_config.toml")

    logger.info(f"Wrote {len(result.edges)} edges and report to {out}")
    return RunOutputs(
        out, {"edges": edges_path, "report": report_path, "config": config_path}
    )


def sim_config_from_settings(settings: Mapping[str, Any]) -> SimConfig:
    return SimConfig(
        n_nodes=int(settings["nodes"]),
        n_samples=int(settings["samples"]),
        er_p=float(settings["er_p"]),
        edge_rate=float(settings["edge_rate"]),
        base_rate=float(settings["base_rate"]),
        noise_rate=float(settings["noise_rate"]),
        seed=int(settings["seed"]),
    )


def run_simulate(settings: Mapping[str, Any], output_dir: PathLike) -> RunOutputs:
    """Simulate an ER network and write counts.csv, truth_edges.csv and run_config.toml."""
    sim_config = sim_config_from_settings(settings)
    adj, counts = simulate_network(sim_config)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts_path = out / "counts.csv"
    save_counts(counts, counts_path)

    truth_path = out / "truth_edges.csv"
    edges = truth_edges(adj)
    with open(truth_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["source", "target"])
        for i, j in edges:
            writer.writerow([counts.labels[i], counts.labels[j]])
    config_path = save_settings(settings, out / "run_config.toml")

    logger.info(
        f"Simulated {sim_config.n_nodes} nodes x {sim_config.n_samples} samples "
        f"with {len(edges)} edges into {out}"
    )
    return RunOutputs(
        out, {"counts": counts_path, "truth": truth_path, "config": config_path}
    )


def run_grid(settings: Mapping[str, Any], output_dir: PathLike) -> RunOutputs:
    """Run the benchmark grid and write benchmark.csv, benchmark_errors.csv and run_config.toml."""
    grid = grid_from_settings(settings, inference_config_from_settings(settings, workers=1))
    report = run_benchmark(grid)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "benchmark.csv"
    errors_path = out / "benchmark_errors.csv"
    report.write(results_path, errors_path)
    config_path = save_settings(settings, out / "run_config.toml")

    logger.info(
        f"Benchmark wrote {len(report.rows)} rows ({len(report.errors)} errored cells) to {out}"
    )
    return RunOutputs(
        out, {"results": results_path, "errors": errors_path, "config": config_path}
    )
