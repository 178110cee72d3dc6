"""
poissonet.entropy - Entropy, mutual information and conditional mutual
information for Poisson count variables.

All quantities are in nats. Single-variable Poisson entropies are evaluated
from their series representation, truncated once the neglected pmf tail mass
falls below a policy threshold. Joint entropies of coupled Poisson variables
use the small-rate approximation

    H(X_1..X_n) ~= sum_i H(Poisson(l_ii)) + sum_{j>i} l_ij

with exact bivariate evaluation kept as the accuracy reference. A Gaussian
closed form is provided as the baseline estimator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special, stats

from . import rates as rate_estimation
from .counts import CountMatrix
from .rates import RateMatrix

logger = logging.getLogger(__name__)

DEFAULT_TAIL_MASS = 1e-12
DEFAULT_MAX_TERMS = 1_000_000
GAUSSIAN_JITTER = 1e-9

# Correlations are kept this far from +-1 before taking log(1 - rho^2).
_RHO_LIMIT = 1.0 - 1e-12


class EntropyError(Exception):
    """Base exception for entropy evaluation."""


class RateDomainError(EntropyError, ValueError):
    """Raised for negative, non-finite or otherwise invalid rates."""


class ConditioningError(EntropyError, ValueError):
    """Raised when a condition set overlaps the variables being compared."""


class SingularCovarianceError(EntropyError):
    """Raised when a required covariance minor stays singular after jitter."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Where to stop the Poisson entropy series."""

    tail_mass: float = DEFAULT_TAIL_MASS
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        if not 0.0 < self.tail_mass < 1.0:
            raise RateDomainError(f"tail_mass must lie in (0, 1), got {self.tail_mass}")
        if int(self.max_terms) < 1:
            raise RateDomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_POLICY = TruncationPolicy()


def _check_rate(rate: float, name: str = "rate") -> float:
    value = float(rate)
    if not math.isfinite(value) or value < 0.0:
        raise RateDomainError(f"{name} must be finite and non-negative, got {rate!r}")
    return value


def series_support(rate: float, policy: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """
    Indices 0..K of the truncated Poisson series.

    K is the first index at which the cumulative pmf reaches
    1 - tail_mass, capped at max_terms - 1.
    """
    rate = _check_rate(rate)
    cap = int(policy.max_terms) - 1
    upper = min(int(math.ceil(rate + 12.0 * math.sqrt(rate) + 40.0)), cap)
    while True:
        k = np.arange(upper + 1)
        hit = np.flatnonzero(stats.poisson.sf(k, rate) <= policy.tail_mass)
        if hit.size:
            return k[: hit[0] + 1]
        if upper >= cap:
            logger.debug(f"Poisson series for rate {rate} truncated at max_terms")
            return k
        upper = min(upper * 2, cap)


def poisson_entropy(rate: float, policy: TruncationPolicy = DEFAULT_POLICY) -> float:
    """
    Entropy of a Poisson(rate) variable.

    Evaluates l - l ln l + sum_k pmf(k) ln k! over the truncated support.

    Raises:
        RateDomainError: If rate is negative or not finite
    """
    lam = _check_rate(rate)
    if lam == 0.0:
        return 0.0
    k = series_support(lam, policy)
    pmf = stats.poisson.pmf(k, lam)
    return float(lam - lam * math.log(lam) + np.dot(pmf, special.gammaln(k + 1)))


def poisson_entropies(
    rates: Sequence[float], policy: TruncationPolicy = DEFAULT_POLICY
) -> np.ndarray:
    """Vectorized poisson_entropy over an array of rates."""
    lam = np.asarray(rates, dtype=float)
    if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
        raise RateDomainError("rates must be finite and non-negative")
    out = np.zeros(lam.shape)
    positive = lam > 0.0
    if not np.any(positive):
        return out
    lam_pos = lam[positive]
    k = series_support(float(lam_pos.max()), policy)
    pmf = stats.poisson.pmf(k[np.newaxis, :], lam_pos[:, np.newaxis])
    out[positive] = lam_pos - lam_pos * np.log(lam_pos) + pmf @ special.gammaln(k + 1)
    return out


def _log_coupling_factor(k1: np.ndarray, k2: np.ndarray, d: float) -> np.ndarray:
    """ln D(x1, x2) = ln sum_k C(x1,k) C(x2,k) k! d^k on the grid k1 x k2."""
    x1 = k1[:, np.newaxis, np.newaxis].astype(float)
    x2 = k2[np.newaxis, :, np.newaxis].astype(float)
    kk = np.arange(min(k1[-1], k2[-1]) + 1, dtype=float)[np.newaxis, np.newaxis, :]
    valid = (kk <= x1) & (kk <= x2)
    with np.errstate(invalid="ignore"):
        terms = (
            special.gammaln(x1 + 1)
            - special.gammaln(np.where(valid, x1 - kk, 0.0) + 1)
            + special.gammaln(x2 + 1)
            - special.gammaln(np.where(valid, x2 - kk, 0.0) + 1)
            - special.gammaln(kk + 1)
            + kk * math.log(d)
        )
    terms = np.where(valid, terms, -np.inf)
    return special.logsumexp(terms, axis=2)


def bivariate_joint_entropy_exact(
    l11: float, l22: float, l12: float, policy: TruncationPolicy = DEFAULT_POLICY
) -> float:
    """
    Joint entropy of a bivariate Poisson pair by direct double summation.

    X1 = Y11 + Y12 and X2 = Y22 + Y12 with independent Y's; each index is
    truncated where its marginal (rate l_ii + l12) reaches 1 - tail_mass.
    All terms are evaluated in the log domain.

    Raises:
        RateDomainError: For invalid rates, or l12 > 0 with l11 * l22 == 0
    """
    a = _check_rate(l11, "l11")
    b = _check_rate(l22, "l22")
    c = _check_rate(l12, "l12")
    if c > 0.0 and a * b == 0.0:
        raise RateDomainError("coupling rate requires positive base rates l11 and l22")

    k1 = series_support(a + c, policy)
    k2 = series_support(b + c, policy)
    x1 = k1[:, np.newaxis].astype(float)
    x2 = k2[np.newaxis, :].astype(float)
    log_p = (
        -(a + b + c)
        + special.xlogy(x1, a)
        - special.gammaln(x1 + 1)
        + special.xlogy(x2, b)
        - special.gammaln(x2 + 1)
    )
    if c > 0.0:
        log_p = log_p + _log_coupling_factor(k1, k2, c / (a * b))
    p = np.exp(log_p)
    return float(-np.sum(np.where(p > 0.0, p * log_p, 0.0)))


def joint_entropy_approx(
    rates: RateMatrix,
    indices: Optional[Sequence[int]] = None,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> float:
    """
    Approximate joint entropy of the variables in indices (default: all).

    Sum of the base-rate Poisson entropies plus the sum of the coupling
    rates over distinct pairs.
    """
    sub = rates if indices is None else rates.subset(indices)
    values = sub.values
    marginals = float(np.sum(poisson_entropies(np.diag(values), policy)))
    return marginals + float(np.sum(np.triu(values, k=1)))


def _pair_matrix(l11: float, l22: float, l12: float) -> RateMatrix:
    return RateMatrix(np.array([[l11, l12], [l12, l22]], dtype=float))


def mutual_information_poisson(
    l11: float, l22: float, l12: float, policy: TruncationPolicy = DEFAULT_POLICY
) -> float:
    """
    Mutual information of a coupled Poisson pair.

    Uses the hatted marginals Poisson(l11 + l12) and Poisson(l22 + l12),
    which are the true marginals of the summed-latent construction, against
    the approximate joint entropy.
    """
    a = _check_rate(l11, "l11")
    b = _check_rate(l22, "l22")
    c = _check_rate(l12, "l12")
    hatted = poisson_entropy(a + c, policy) + poisson_entropy(b + c, policy)
    return hatted - joint_entropy_approx(_pair_matrix(a, b, c), policy=policy)


def mutual_information_unhatted(
    l11: float, l22: float, l12: float, policy: TruncationPolicy = DEFAULT_POLICY
) -> float:
    """
    Mutual information computed with the base-rate marginals.

    Equals -l12 under the joint approximation, i.e. it is never positive;
    the hatted variant is the one used for inference.
    """
    a = _check_rate(l11, "l11")
    b = _check_rate(l22, "l22")
    c = _check_rate(l12, "l12")
    marginals = poisson_entropy(a, policy) + poisson_entropy(b, policy)
    return marginals - joint_entropy_approx(_pair_matrix(a, b, c), policy=policy)


def poisson_mi_from_coupling(
    couplings: Sequence[float],
    base_x,
    base_y,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> np.ndarray:
    """
    Pairwise Poisson MI for an array of (conditional) coupling rates.

    base_x and base_y are the base rates (rate-matrix diagonal entries) of
    the two sides, scalars or arrays broadcasting against couplings. Each
    entry is H(a + c) + H(b + c) - H(a) - H(b) - c, i.e.
    mutual_information_poisson(a, b, c) with c clipped to [0, 1].
    """
    c = np.clip(np.asarray(couplings, dtype=float), 0.0, 1.0)
    a, b, c = np.broadcast_arrays(
        np.asarray(base_x, dtype=float), np.asarray(base_y, dtype=float), c
    )
    marginals = poisson_entropies(a + c, policy) + poisson_entropies(b + c, policy)
    return marginals - poisson_entropies(a, policy) - poisson_entropies(b, policy) - c


def gaussian_mi_from_correlation(rhos: Sequence[float]) -> np.ndarray:
    """Gaussian (conditional) MI from (partial) correlations: -ln(1 - rho^2) / 2."""
    rho = np.clip(np.asarray(rhos, dtype=float), -_RHO_LIMIT, _RHO_LIMIT)
    return -0.5 * np.log1p(-(rho * rho))


def conditional_mutual_information_poisson(
    x: int,
    y: int,
    condition: Iterable[int],
    counts: CountMatrix,
    policy: TruncationPolicy = DEFAULT_POLICY,
    rates: Optional[RateMatrix] = None,
) -> float:
    """
    I(X; Y | S) for count data under the Poisson approximation.

    The base rates l_xx and l_yy are diagonal entries of the rate matrix of
    the whole dataset (estimated from counts unless given), so a variable
    coupled to many others keeps a small base rate. The conditional
    coupling rate is the positive partial correlation of x and y given S.
    With S empty this is mutual_information_poisson on the rate-matrix
    entries of the pair.

    Args:
        rates: Rate matrix of counts, to avoid re-estimating it per call

    Raises:
        ConditioningError: If x == y or S contains x or y
    """
    condition = tuple(condition)
    if x == y:
        raise ConditioningError("x and y must be different variables")
    if x in condition or y in condition:
        raise ConditioningError("condition set must not contain x or y")
    if counts.n_samples < 2:
        raise rate_estimation.RateEstimationError("at least 2 samples are required")
    if counts.is_constant(x) or counts.is_constant(y):
        return 0.0
    if rates is None:
        rates = rate_estimation.estimate_rate_matrix(counts)
    elif rates.n != counts.n_variables:
        raise ConditioningError(
            f"rate matrix covers {rates.n} variables, counts have {counts.n_variables}"
        )
    coupling = rate_estimation.conditional_rate(x, y, condition, counts)
    return mutual_information_poisson(rates.base_rate(x), rates.base_rate(y), coupling, policy)


def _log_det(covariance: np.ndarray, indices: Sequence[int]) -> float:
    indices = list(indices)
    if not indices:
        return 0.0
    minor = covariance[np.ix_(indices, indices)]
    sign, log_det = np.linalg.slogdet(minor)
    if sign > 0 and math.isfinite(log_det):
        return float(log_det)
    sign, log_det = np.linalg.slogdet(minor + GAUSSIAN_JITTER * np.eye(len(indices)))
    if sign > 0 and math.isfinite(log_det):
        logger.warning(f"Singular covariance minor {indices}; applied diagonal jitter")
        return float(log_det)
    raise SingularCovarianceError(f"covariance minor {indices} is singular")


def gaussian_entropy(covariance: np.ndarray) -> float:
    """Differential entropy 1/2 ln((2 pi e)^k det(cov)) of a Gaussian."""
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    k = cov.shape[0]
    return 0.5 * (k * math.log(2.0 * math.pi * math.e) + _log_det(cov, range(k)))


def gaussian_cmi(
    x: int, y: int, condition: Iterable[int], covariance: np.ndarray
) -> float:
    """
    Gaussian conditional mutual information from a covariance matrix.

    I(X;Y|S) = 1/2 [ln|C_xS| + ln|C_yS| - ln|C_xyS| - ln|C_S|].
    """
    condition = list(condition)
    if x == y:
        raise ConditioningError("x and y must be different variables")
    if x in condition or y in condition:
        raise ConditioningError("condition set must not contain x or y")
    cov = np.asarray(covariance, dtype=float)
    return 0.5 * (
        _log_det(cov, [x, *condition])
        + _log_det(cov, [y, *condition])
        - _log_det(cov, [x, y, *condition])
        - _log_det(cov, condition)
    )
