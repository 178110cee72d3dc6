"""
poissonet.stats - Distribution utilities.

Goodness-of-fit screening against Poisson and negative binomial laws,
negative binomial pmf, box-cox transform and the seeded permutation
machinery shared by the inference engine and the benchmarks.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from scipy import special
from scipy import stats as sps

logger = logging.getLogger(__name__)

DEFAULT_N_BOOT = 200
DEFAULT_ALPHA = 0.05
MIN_GOF_SAMPLE = 10


class GoodnessOfFitError(ValueError):
    """Raised when a sample cannot be screened."""


class DistributionDomainError(ValueError):
    """Raised for parameters outside a distribution's domain."""


@dataclass(frozen=True)
class GofResult:
    """Outcome of a bootstrap Kolmogorov-Smirnov screen."""

    statistic: float
    p_value: float
    distribution: str
    fitted_params: Dict[str, float] = field(default_factory=dict)

    def passed(self, alpha: float = DEFAULT_ALPHA) -> bool:
        return self.p_value > alpha

    def to_dict(self) -> Dict[str, object]:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "distribution": self.distribution,
            "fitted_params": dict(self.fitted_params),
        }


def stable_key(label: str) -> int:
    """64-bit key derived from a label, identical across processes and runs."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """
    Seeded PCG64 generator for the substream identified by key.

    The same (seed, key) always yields the same stream.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) & 0xFFFFFFFFFFFFFFFF for k in key)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def permute(sequence: Sequence, rng: np.random.Generator) -> np.ndarray:
    """Uniform random permutation of a sequence."""
    return rng.permutation(np.asarray(sequence))


def box_cox(z: Sequence[float], gamma: float) -> np.ndarray:
    """
    Box-cox transform: (z^gamma - 1) / gamma, or ln z when gamma == 0.

    Counts must be shifted (e.g. by +1) by the caller since zeros are
    outside the domain.

    Raises:
        DistributionDomainError: If any entry is not strictly positive
    """
    values = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise DistributionDomainError("box-cox requires strictly positive values")
    return special.boxcox(values, gamma)


def negbin_pmf(k, r: float, lam: float):
    """
    Negative binomial pmf C(k+r-1, k) lam^k (1-lam)^r.

    Evaluated through log-gamma terms; k may be an array.

    Raises:
        DistributionDomainError: If lam is outside (0, 1) or r <= 0
    """
    if not 0.0 < lam < 1.0:
        raise DistributionDomainError(f"lam must lie in (0, 1), got {lam}")
    if not r > 0.0:
        raise DistributionDomainError(f"r must be positive, got {r}")
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise DistributionDomainError("k must be non-negative")
    return np.exp(sps.nbinom.logpmf(k_arr, r, 1.0 - lam))


def fit_negbin_moments(sample: Sequence[int]) -> Tuple[float, float]:
    """
    Method-of-moments negative binomial fit.

    Returns:
        (r, lam) with r = m^2 / (v - m) and lam = 1 - m / v

    Raises:
        GoodnessOfFitError: If the sample is not over-dispersed (v <= m)
    """
    data = np.asarray(sample, dtype=float)
    mean = float(data.mean())
    var = float(data.var(ddof=1))
    if var <= mean or mean <= 0.0:
        raise GoodnessOfFitError("sample is not over-dispersed")
    return mean * mean / (var - mean), 1.0 - mean / var


# A fitted model is (distribution name, parameters); a drawer samples from it.
_Fit = Tuple[str, Dict[str, float]]


def _fit_poisson(sample: np.ndarray) -> _Fit:
    return "poisson", {"lam": float(sample.mean())}


def _fit_negbin_or_poisson(sample: np.ndarray) -> _Fit:
    try:
        r, lam = fit_negbin_moments(sample)
    except GoodnessOfFitError:
        return _fit_poisson(sample)
    return "negbin", {"r": r, "lam": lam}


def _draw(fit: _Fit, size: int, rng: np.random.Generator) -> np.ndarray:
    name, params = fit
    if name == "poisson":
        return rng.poisson(params["lam"], size)
    return rng.negative_binomial(params["r"], 1.0 - params["lam"], size)


def _bootstrap_ks(
    sample: Sequence[int],
    fitter: Callable[[np.ndarray], _Fit],
    rng: np.random.Generator,
    n_boot: int,
) -> GofResult:
    data = np.asarray(sample)
    if data.ndim != 1 or data.size < MIN_GOF_SAMPLE:
        raise GoodnessOfFitError(
            f"goodness-of-fit needs at least {MIN_GOF_SAMPLE} values, got {data.size}"
        )
    if n_boot < 1:
        raise GoodnessOfFitError("n_boot must be >= 1")
    size = data.size
    fit = fitter(data)
    observed = float(sps.ks_2samp(data, _draw(fit, size, rng)).statistic)

    exceed = 0
    for _ in range(n_boot):
        replicate = _draw(fit, size, rng)
        refit = fitter(replicate)
        stat = sps.ks_2samp(replicate, _draw(refit, size, rng)).statistic
        if stat >= observed:
            exceed += 1
    p_value = (1 + exceed) / (1 + n_boot)
    return GofResult(observed, p_value, fit[0], fit[1])


def ks_test_poisson(
    sample: Sequence[int], rng: np.random.Generator, n_boot: int = DEFAULT_N_BOOT
) -> GofResult:
    """
    Two-sample KS screen against a fitted Poisson law.

    lam is the sample mean; the statistic compares the sample with an
    equal-size synthetic Poisson(lam) sample and the p-value comes from a
    parametric bootstrap that refits lam on every replicate.
    """
    return _bootstrap_ks(sample, _fit_poisson, rng, n_boot)


def ks_test_negbin(
    sample: Sequence[int], rng: np.random.Generator, n_boot: int = DEFAULT_N_BOOT
) -> GofResult:
    """
    Two-sample KS screen against a method-of-moments negative binomial.

    Samples that are not over-dispersed fall back to a Poisson fit; a
    constant sample is an exact point-mass fit (statistic 0, p-value 1).
    """
    data = np.asarray(sample)
    if data.ndim == 1 and data.size >= MIN_GOF_SAMPLE and np.all(data == data[0]):
        return GofResult(0.0, 1.0, "point", {"value": float(data[0])})
    return _bootstrap_ks(data, _fit_negbin_or_poisson, rng, n_boot)
