"""
poissonet.omii - Greedy network inference by conditional mutual information.

For every target variable, parents are discovered in two phases:

1. Forward selection: repeatedly add the candidate with the largest
   CMI(candidate; target | parents so far) while a shuffle test of that
   candidate finds it significant. With forward_null="max" the candidate is
   instead tested against the permutation distribution of the largest CMI
   over all remaining candidates.
2. Backward elimination: one ascending pass that drops every parent whose
   CMI given the remaining parents is no longer significant.

The CMI estimator is pluggable (Poisson approximation or Gaussian). The
Poisson estimator takes its base rates from the rate matrix of the whole
dataset, estimated once per run. With
lag=1 sources are taken one step in the past of the target and the target's
own past is always conditioned on, which turns the CMI into a transfer /
causation entropy.

Every shuffle test draws its permutations from a substream keyed by the
seed, the unordered pair of variable labels and the phase, so results do not
depend on worker scheduling or on the order of variables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, TypedDict

import numpy as np

from .counts import CountMatrix
from .entropy import (
    DEFAULT_TAIL_MASS,
    TruncationPolicy,
    gaussian_mi_from_correlation,
    poisson_mi_from_coupling,
)
from .rates import (
    conditioning_basis,
    correlate_residuals,
    estimate_rate_matrix,
    residualize,
)
from .stats import box_cox, make_rng, permute, stable_key

logger = logging.getLogger(__name__)

ESTIMATORS = ("poisson", "gaussian")
FORWARD_NULLS = ("single", "max")
FORWARD_PHASE = 0
BACKWARD_PHASE = 1
MIN_SHUFFLES = 20


class InferenceConfigError(ValueError):
    """Raised for invalid inference settings or unusable input data."""


@dataclass(frozen=True)
class InferenceConfig:
    """Settings of one inference run."""

    estimator: str = "poisson"
    alpha: float = 0.05
    n_shuffles: int = 200
    lag: int = 0
    max_parents: Optional[int] = None
    seed: int = 0
    workers: int = 1
    box_cox_gamma: Optional[float] = None
    tail_mass: float = DEFAULT_TAIL_MASS
    forward_null: str = "single"

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise InferenceConfigError(
                f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise InferenceConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_shuffles < MIN_SHUFFLES:
            raise InferenceConfigError(
                f"n_shuffles must be >= {MIN_SHUFFLES}, got {self.n_shuffles}"
            )
        if self.lag not in (0, 1):
            raise InferenceConfigError(f"lag must be 0 or 1, got {self.lag}")
        if self.max_parents is not None and self.max_parents < 1:
            raise InferenceConfigError(
                f"max_parents must be >= 1, got {self.max_parents}"
            )
        if self.workers < 1:
            raise InferenceConfigError(f"workers must be >= 1, got {self.workers}")
        if self.forward_null not in FORWARD_NULLS:
            raise InferenceConfigError(
                f"forward_null must be one of {FORWARD_NULLS}, got {self.forward_null!r}"
            )

    @property
    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(tail_mass=self.tail_mass)


class EdgeRecord(TypedDict):
    source: int
    target: int
    cmi: float
    p_value: float
    order_added: int


class TraceStep(TypedDict):
    phase: str
    candidate: int
    condition: List[int]
    cmi: float
    p_value: float
    accepted: bool


@dataclass(frozen=True)
class ShuffleOutcome:
    cmi: float
    p_value: float
    accepted: bool


@dataclass
class SelectionResult:
    """Parent set of one target after a phase, with the steps that led to it."""

    target: int
    parents: List[int]
    trace: List[TraceStep] = field(default_factory=list)
    outcomes: Dict[int, ShuffleOutcome] = field(default_factory=dict)


@dataclass
class InferenceResult:
    """
    Inferred network.

    adjacency[j, i] == 1 means j is a parent of target i (edge j -> i).
    """

    adjacency: np.ndarray
    edges: List[EdgeRecord]
    traces: Dict[int, List[TraceStep]]
    labels: Tuple[str, ...]

    def parents(self, target: int) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[:, target])]


def _prepare_series(
    counts: CountMatrix, config: InferenceConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """(source rows, target rows) as floats, shifted one step apart in lag mode."""
    data = counts.values.astype(float)
    if config.estimator == "gaussian" and config.box_cox_gamma is not None:
        data = box_cox(data + 1.0, config.box_cox_gamma)
    if config.lag == 0:
        return data, data
    return data[:, :-1], data[:, 1:]


def _base_rates(counts: CountMatrix, config: InferenceConfig) -> Optional[np.ndarray]:
    """Rate-matrix diagonal used by the Poisson kernel; None for the Gaussian one."""
    if config.estimator != "poisson":
        return None
    return np.diag(estimate_rate_matrix(counts).values).copy()


class _TargetContext:
    """Per-target view of the data shared by both selection phases."""

    def __init__(
        self,
        target: int,
        counts: CountMatrix,
        config: InferenceConfig,
        base_rates: Optional[np.ndarray] = None,
    ):
        n = counts.n_variables
        if not 0 <= target < n:
            raise InferenceConfigError(f"target {target} out of range for {n} variables")
        self.target = target
        self.config = config
        self.policy = config.policy
        self.sources, targets = _prepare_series(counts, config)
        self.target_series = targets[target]
        self.n_samples = self.target_series.shape[0]
        self.forced = [target] if config.lag else []
        self.candidates = [j for j in range(n) if j != target]
        self.max_parents = min(
            config.max_parents or len(self.candidates), len(self.candidates)
        )
        if base_rates is None:
            base_rates = _base_rates(counts, config)
        self.base_rates = base_rates
        self._target_key = stable_key(counts.labels[target])
        self._keys = [stable_key(label) for label in counts.labels]

    def _score(
        self,
        indices: Sequence[int],
        rows: np.ndarray,
        basis: np.ndarray,
        target_resid: np.ndarray,
    ) -> np.ndarray:
        rho = correlate_residuals(
            residualize(rows, basis), target_resid, rows, self.target_series
        )
        if self.config.estimator == "gaussian":
            return gaussian_mi_from_correlation(rho)
        return poisson_mi_from_coupling(
            rho, self.base_rates[list(indices)], self.base_rates[self.target], self.policy
        )

    def _basis(self, condition: Sequence[int]) -> np.ndarray:
        rows = self.sources[self.forced + list(condition)]
        return conditioning_basis(rows, self.n_samples)

    def scores(self, candidates: Sequence[int], condition: Sequence[int]) -> np.ndarray:
        basis = self._basis(condition)
        target_resid = residualize(self.target_series, basis)[0]
        return self._score(candidates, self.sources[list(candidates)], basis, target_resid)

    def shuffle_test(
        self,
        j: int,
        condition: Sequence[int],
        phase: int,
        competitors: Optional[Iterable[int]] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> ShuffleOutcome:
        basis = self._basis(condition)
        target_resid = residualize(self.target_series, basis)[0]
        observed = float(self._score([j], self.sources[[j]], basis, target_resid)[0])

        pool = [j] if competitors is None else sorted(set(competitors) | {j})
        rows = self.sources[pool]
        if rng is None:
            pair = sorted((self._keys[j], self._target_key))
            rng = make_rng(self.config.seed, *pair, phase)

        exceed = 0
        order = np.arange(self.n_samples)
        for _ in range(self.config.n_shuffles):
            null = self._score(pool, rows[:, permute(order, rng)], basis, target_resid)
            if float(null.max()) >= observed:
                exceed += 1
        p_value = (1 + exceed) / (1 + self.config.n_shuffles)
        return ShuffleOutcome(observed, p_value, p_value <= self.config.alpha)


def _forward(ctx: _TargetContext) -> SelectionResult:
    result = SelectionResult(ctx.target, [])
    while len(result.parents) < ctx.max_parents:
        remaining = [j for j in ctx.candidates if j not in result.parents]
        if not remaining:
            break
        scores = ctx.scores(remaining, result.parents)
        best = remaining[int(np.argmax(scores))]
        competitors = remaining if ctx.config.forward_null == "max" else None
        outcome = ctx.shuffle_test(
            best, result.parents, FORWARD_PHASE, competitors=competitors
        )
        result.trace.append(
            TraceStep(
                phase="forward",
                candidate=best,
                condition=list(result.parents),
                cmi=outcome.cmi,
                p_value=outcome.p_value,
                accepted=outcome.accepted,
            )
        )
        logger.debug(
            f"target {ctx.target}: forward candidate {best} "
            f"cmi={outcome.cmi:.6g} p={outcome.p_value:.4g} accepted={outcome.accepted}"
        )
        if not outcome.accepted:
            break
        result.parents.append(best)
        result.outcomes[best] = outcome
    return result


def _backward(ctx: _TargetContext, parents: Sequence[int]) -> SelectionResult:
    kept = list(parents)
    result = SelectionResult(ctx.target, kept)
    for j in sorted(parents):
        condition = [k for k in kept if k != j]
        outcome = ctx.shuffle_test(j, condition, BACKWARD_PHASE)
        result.trace.append(
            TraceStep(
                phase="backward",
                candidate=j,
                condition=condition,
                cmi=outcome.cmi,
                p_value=outcome.p_value,
                accepted=outcome.accepted,
            )
        )
        if outcome.accepted:
            result.outcomes[j] = outcome
        else:
            kept.remove(j)
            logger.debug(f"target {ctx.target}: removed parent {j}")
    return result


def _check_counts(counts: CountMatrix, config: InferenceConfig) -> None:
    if counts.n_variables < 2:
        raise InferenceConfigError("inference needs at least two variables")
    needed = 3 + config.lag
    if counts.n_samples < needed:
        raise InferenceConfigError(
            f"inference needs at least {needed} samples, got {counts.n_samples}"
        )


def forward_select(
    target: int, counts: CountMatrix, config: InferenceConfig
) -> SelectionResult:
    """
    Greedy aggregative discovery of the target's parents.

    Ties in the CMI argmax go to the lowest variable index. The argmax
    candidate is added only if shuffle_test accepts it (its own row
    permuted; with forward_null="max", every remaining candidate permuted
    and the largest CMI kept). Selection also stops at max_parents.
    """
    _check_counts(counts, config)
    return _forward(_TargetContext(target, counts, config))


def backward_eliminate(
    target: int, parents: Sequence[int], counts: CountMatrix, config: InferenceConfig
) -> SelectionResult:
    """
    Single ascending pass removing parents that are not significant given
    the other parents still kept.
    """
    _check_counts(counts, config)
    return _backward(_TargetContext(target, counts, config), parents)


def shuffle_test(
    j: int,
    target: int,
    condition: Sequence[int],
    counts: CountMatrix,
    config: InferenceConfig,
    rng: Optional[np.random.Generator] = None,
    competitors: Optional[Iterable[int]] = None,
) -> ShuffleOutcome:
    """
    Permutation significance of CMI(X_j; X_target | condition).

    The null permutes the samples of row j n_shuffles times and recomputes
    the CMI; p = (1 + #{null >= observed}) / (1 + n_shuffles). With
    competitors given, each null replicate applies the permutation to every
    competitor row and keeps the largest CMI.

    Args:
        rng: Generator for the permutations; defaults to the backward-phase
            substream of the (j, target) label pair
    """
    _check_counts(counts, config)
    if j == target:
        raise InferenceConfigError("source and target must differ")
    if j in condition or target in condition:
        raise InferenceConfigError("condition set must not contain source or target")
    ctx = _TargetContext(target, counts, config)
    return ctx.shuffle_test(j, condition, BACKWARD_PHASE, competitors, rng)


def _infer_target(
    args: Tuple[int, CountMatrix, InferenceConfig, Optional[np.ndarray]]
) -> Tuple[int, List[EdgeRecord], List[TraceStep]]:
    target, counts, config, base_rates = args
    ctx = _TargetContext(target, counts, config, base_rates)
    forward = _forward(ctx)
    backward = _backward(ctx, forward.parents)
    edges = [
        EdgeRecord(
            source=j,
            target=target,
            cmi=backward.outcomes[j].cmi,
            p_value=backward.outcomes[j].p_value,
            order_added=forward.parents.index(j) + 1,
        )
        for j in sorted(backward.parents, key=forward.parents.index)
    ]
    return target, edges, forward.trace + backward.trace


def infer_network(counts: CountMatrix, config: InferenceConfig) -> InferenceResult:
    """
    Run forward selection and backward elimination for every target.

    Targets run in a multiprocessing pool when config.workers > 1; the
    result is identical to a serial run.
    """
    _check_counts(counts, config)
    n = counts.n_variables
    base_rates = _base_rates(counts, config)
    tasks = [(target, counts, config, base_rates) for target in range(n)]
    if config.workers > 1:
        with Pool(processes=min(config.workers, n)) as pool:
            outcomes = pool.map(_infer_target, tasks, chunksize=1)
    else:
        outcomes = [_infer_target(task) for task in tasks]

    adjacency = np.zeros((n, n), dtype=np.int8)
    edges: List[EdgeRecord] = []
    traces: Dict[int, List[TraceStep]] = {}
    for target, target_edges, trace in sorted(outcomes, key=lambda item: item[0]):
        traces[target] = trace
        for edge in target_edges:
            adjacency[edge["source"], target] = 1
            edges.append(edge)

    logger.info(
        f"Inferred {len(edges)} edges over {n} variables "
        f"(estimator={config.estimator}, lag={config.lag}, alpha={config.alpha})"
    )
    return InferenceResult(adjacency, edges, traces, counts.labels)
