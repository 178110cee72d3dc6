"""
poissonet.rates - Rate matrix estimation from count data.

Rates come from Pearson correlation rather than covariance so that every
coupling rate lies in [0, 1]. Negative correlations clamp to zero because the
summed-latent Poisson model cannot express negative covariance. Conditional
coupling rates use partial correlation given a condition set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy import linalg

from .counts import CountMatrix

logger = logging.getLogger(__name__)

# Residual norms below this fraction of the raw row norm count as zero variance.
DEGENERATE_RELATIVE_NORM = 1e-9


class RateEstimationError(ValueError):
    """Raised when rates cannot be estimated from the given data."""


@dataclass(frozen=True)
class RateMatrix:
    """
    Symmetric nonnegative matrix of Poisson rates.

    Diagonal entries are base rates, off-diagonal entries coupling rates.
    """

    values: np.ndarray
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise RateEstimationError(
                f"rate matrix must be square, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise RateEstimationError("rate matrix has non-finite entries")
        if np.any(values < 0):
            raise RateEstimationError("rate matrix has negative entries")
        if not np.allclose(values, values.T, rtol=0.0, atol=1e-12):
            raise RateEstimationError("rate matrix is not symmetric")
        values = (values + values.T) / 2.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def base_rate(self, i: int) -> float:
        return float(self.values[i, i])

    def coupling(self, i: int, j: int) -> float:
        return float(self.values[i, j])

    def subset(self, indices: Sequence[int]) -> "RateMatrix":
        indices = list(indices)
        labels = tuple(self.labels[i] for i in indices) if self.labels else ()
        return RateMatrix(self.values[np.ix_(indices, indices)], labels)


def _require_samples(n_samples: int, needed: int = 2) -> None:
    if n_samples < needed:
        raise RateEstimationError(
            f"at least {needed} samples are required, got {n_samples}"
        )


def correlation(counts: CountMatrix) -> np.ndarray:
    """
    Pearson correlation between the rows of a count matrix.

    Zero-variance rows get 0 off-diagonal correlation; the diagonal is 1.

    Raises:
        RateEstimationError: If fewer than two samples are available
    """
    _require_samples(counts.n_samples)
    data = counts.values.astype(float)
    if counts.n_variables == 1:
        return np.ones((1, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.corrcoef(data)
    corr = np.nan_to_num(corr, nan=0.0, posinf=0.0, neginf=0.0)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def estimate_rate_matrix(counts: CountMatrix) -> RateMatrix:
    """
    Estimate the rate matrix from correlations.

    Off-diagonal rates are the positive part of the correlation; each
    diagonal rate is one minus the sum of its row's coupling rates, floored
    at zero.
    """
    corr = correlation(counts)
    rates = np.clip(corr, 0.0, None)
    np.fill_diagonal(rates, 0.0)
    base = np.clip(1.0 - rates.sum(axis=1), 0.0, None)
    rates[np.diag_indices_from(rates)] = base
    if np.any(base == 0.0):
        logger.debug(
            f"{int(np.sum(base == 0.0))} base rates floored at zero "
            "(coupling sums exceed one)"
        )
    return RateMatrix(rates, counts.labels)


def conditioning_basis(condition_rows: np.ndarray, n_samples: int) -> np.ndarray:
    """
    Orthonormal basis of the span of an intercept plus the condition rows.

    Rank-deficient condition sets (duplicate or collinear rows) are handled
    by the rank-revealing orthogonalization.
    """
    cond = np.asarray(condition_rows, dtype=float).reshape(-1, n_samples)
    design = np.vstack([np.ones(n_samples), cond]).T
    return linalg.orth(design)


def residualize(rows: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Remove the least-squares projection of each row onto the basis."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return rows - (rows @ basis) @ basis.T


def correlate_residuals(
    sources: np.ndarray, target: np.ndarray, raw_sources: np.ndarray, raw_target: np.ndarray
) -> np.ndarray:
    """
    Correlation between each residual source row and the residual target.

    raw_* are the rows before residualization; a residual whose norm is
    negligible relative to its raw row is treated as zero variance and
    yields correlation 0.
    """
    sources = np.atleast_2d(sources)
    raw_sources = np.atleast_2d(raw_sources)
    target_norm = float(np.linalg.norm(target))
    if target_norm <= DEGENERATE_RELATIVE_NORM * max(1.0, float(np.linalg.norm(raw_target))):
        return np.zeros(sources.shape[0])
    source_norms = np.linalg.norm(sources, axis=1)
    raw_norms = np.maximum(1.0, np.linalg.norm(raw_sources, axis=1))
    valid = source_norms > DEGENERATE_RELATIVE_NORM * raw_norms
    out = np.zeros(sources.shape[0])
    if np.any(valid):
        out[valid] = (sources[valid] @ target) / (source_norms[valid] * target_norm)
    return np.clip(out, -1.0, 1.0)


def partial_correlations(
    sources: np.ndarray, target: np.ndarray, condition_rows: np.ndarray
) -> np.ndarray:
    """Partial correlation of each source row with the target given the condition rows."""
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    target = np.asarray(target, dtype=float)
    basis = conditioning_basis(condition_rows, target.shape[0])
    return correlate_residuals(
        residualize(sources, basis), residualize(target, basis)[0], sources, target
    )


def _check_triple(x: int, y: int, condition: Iterable[int], counts: CountMatrix) -> Tuple[int, ...]:
    condition = tuple(condition)
    if x == y:
        raise RateEstimationError("x and y must be different variables")
    if x in condition or y in condition:
        raise RateEstimationError("condition set must not contain x or y")
    for index in (x, y, *condition):
        if not 0 <= index < counts.n_variables:
            raise RateEstimationError(f"variable index {index} out of range")
    _require_samples(counts.n_samples, len(condition) + 3)
    return condition


def partial_correlation(
    x: int, y: int, condition: Iterable[int], counts: CountMatrix
) -> float:
    """
    Partial correlation of rows x and y given the rows in condition.

    An empty condition set returns the plain correlation; zero-variance
    rows (or residuals) give 0.

    Raises:
        RateEstimationError: If x == y, the condition set contains x or y,
            or fewer than |condition| + 3 samples are available
    """
    condition = _check_triple(x, y, condition, counts)
    if not condition:
        return float(correlation(counts.take([x, y]))[0, 1])
    data = counts.values.astype(float)
    return float(partial_correlations(data[x], data[y], data[list(condition)])[0])


def conditional_rate(
    x: int, y: int, condition: Iterable[int], counts: CountMatrix
) -> float:
    """Conditional coupling rate: the positive part of the partial correlation."""
    return max(partial_correlation(x, y, condition, counts), 0.0)
