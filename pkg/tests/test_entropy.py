"""
Unit tests for poissonet entropy estimators.

Tests cover the Poisson entropy series, exact and approximate bivariate
joint entropies, hatted and unhatted mutual information, conditional mutual
information on count data, and the Gaussian baseline.
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import stats

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from poissonet import entropy
from poissonet.counts import CountMatrix
from poissonet.rates import RateMatrix, estimate_rate_matrix


def direct_entropy(rate, k_max=200):
    """-sum p ln p over a generous support."""
    pmf = stats.poisson.pmf(np.arange(k_max), rate)
    pmf = pmf[pmf > 0]
    return float(-np.sum(pmf * np.log(pmf)))


def approximation_grid():
    """Rate triples in the small-coupling regime l12 <= 0.2 * l11 * l22."""
    grid = []
    for l11 in (0.25, 0.5, 1.0):
        for l22 in (0.25, 0.5, 1.0):
            for l12 in (0.01, 0.05, 0.1 * l11 * l22):
                if l12 <= 0.2 * l11 * l22 + 1e-15:
                    grid.append((l11, l22, l12))
    return grid


class TestPoissonEntropy(unittest.TestCase):
    """Single-variable Poisson entropy."""

    def test_matches_direct_summation(self):
        for rate in (0.1, 0.5, 1.0, 2.0, 5.0):
            with self.subTest(rate=rate):
                self.assertAlmostEqual(
                    entropy.poisson_entropy(rate), direct_entropy(rate), delta=1e-8
                )

    def test_known_values(self):
        self.assertAlmostEqual(entropy.poisson_entropy(0.5), 0.927638, places=5)
        self.assertAlmostEqual(entropy.poisson_entropy(1.0), 1.304681, places=5)

    def test_zero_rate_is_zero(self):
        self.assertEqual(entropy.poisson_entropy(0.0), 0.0)

    def test_negative_rate_rejected(self):
        with self.assertRaises(entropy.RateDomainError):
            entropy.poisson_entropy(-0.1)
        with self.assertRaises(entropy.RateDomainError):
            entropy.poisson_entropy(float("nan"))

    def test_large_rate_near_gaussian_limit(self):
        rate = 400.0
        gaussian = 0.5 * math.log(2 * math.pi * math.e * rate)
        self.assertAlmostEqual(entropy.poisson_entropy(rate), gaussian, delta=1e-3)

    def test_vectorized_matches_scalar(self):
        rates = [0.0, 0.3, 1.0, 2.5]
        vector = entropy.poisson_entropies(rates)
        for rate, value in zip(rates, vector):
            self.assertAlmostEqual(value, entropy.poisson_entropy(rate), places=10)

    def test_support_reaches_tail_mass(self):
        policy = entropy.TruncationPolicy(tail_mass=1e-12)
        k = entropy.series_support(3.0, policy)
        self.assertLessEqual(stats.poisson.sf(k[-1], 3.0), 1e-12)
        self.assertGreater(stats.poisson.sf(k[-2], 3.0), 1e-12)

    def test_truncation_policy_validation(self):
        with self.assertRaises(entropy.RateDomainError):
            entropy.TruncationPolicy(tail_mass=0.0)
        with self.assertRaises(entropy.RateDomainError):
            entropy.TruncationPolicy(max_terms=0)

    def test_strictly_increasing_in_rate(self):
        values = entropy.poisson_entropies(np.arange(0.25, 5.01, 0.25))
        self.assertTrue(np.all(np.diff(values) > 0), values)

    def test_tail_mass_choice_does_not_move_values(self):
        rates = np.arange(0.25, 5.01, 0.25)
        reference = entropy.poisson_entropies(rates, entropy.TruncationPolicy(tail_mass=1e-14))
        for tail_mass in (1e-10, 1e-12):
            with self.subTest(tail_mass=tail_mass):
                values = entropy.poisson_entropies(rates, entropy.TruncationPolicy(tail_mass=tail_mass))
                np.testing.assert_allclose(values, reference, rtol=0, atol=1e-8)


class TestJointEntropy(unittest.TestCase):
    """Exact and approximate bivariate joint entropy."""

    def test_independent_pair_is_sum_of_marginals(self):
        exact = entropy.bivariate_joint_entropy_exact(0.5, 1.0, 0.0)
        expected = entropy.poisson_entropy(0.5) + entropy.poisson_entropy(1.0)
        self.assertAlmostEqual(exact, expected, places=9)

    def test_approx_equals_exact_without_coupling(self):
        rates = RateMatrix([[0.7, 0.0], [0.0, 0.3]])
        self.assertAlmostEqual(
            entropy.joint_entropy_approx(rates),
            entropy.bivariate_joint_entropy_exact(0.7, 0.3, 0.0),
            places=9,
        )

    def test_approx_is_marginals_plus_couplings(self):
        rates = RateMatrix(
            [[0.5, 0.1, 0.0], [0.1, 0.4, 0.2], [0.0, 0.2, 0.3]]
        )
        expected = sum(entropy.poisson_entropy(r) for r in (0.5, 0.4, 0.3)) + 0.3
        self.assertAlmostEqual(entropy.joint_entropy_approx(rates), expected, places=10)

    def test_approx_on_subset(self):
        rates = RateMatrix([[0.5, 0.1, 0.0], [0.1, 0.4, 0.2], [0.0, 0.2, 0.3]])
        expected = entropy.poisson_entropy(0.4) + entropy.poisson_entropy(0.3) + 0.2
        self.assertAlmostEqual(
            entropy.joint_entropy_approx(rates, indices=[1, 2]), expected, places=10
        )

    def test_relative_error_small_in_approximation_regime(self):
        for l11, l22, l12 in approximation_grid():
            with self.subTest(l11=l11, l22=l22, l12=l12):
                exact = entropy.bivariate_joint_entropy_exact(l11, l22, l12)
                approx = entropy.joint_entropy_approx(
                    RateMatrix([[l11, l12], [l12, l22]])
                )
                self.assertLessEqual(abs(approx - exact) / exact, 0.05)

    def test_relative_error_grows_with_coupling(self):
        # Near unit rates the first-order error nearly cancels, so only
        # small base rates are checked.
        for l11, l22 in ((0.25, 0.25), (0.25, 0.5), (0.5, 0.5)):
            errors = []
            for d in (0.02, 0.05, 0.1, 0.2):
                l12 = d * l11 * l22
                exact = entropy.bivariate_joint_entropy_exact(l11, l22, l12)
                approx = entropy.joint_entropy_approx(RateMatrix([[l11, l12], [l12, l22]]))
                errors.append(abs(approx - exact) / exact)
            with self.subTest(l11=l11, l22=l22):
                self.assertEqual(errors, sorted(errors))

    def test_exact_rejects_coupling_without_base_rate(self):
        with self.assertRaises(entropy.RateDomainError):
            entropy.bivariate_joint_entropy_exact(0.0, 0.5, 0.1)


class TestMutualInformation(unittest.TestCase):
    """Hatted and unhatted mutual information."""

    def test_known_value(self):
        self.assertAlmostEqual(
            entropy.mutual_information_poisson(0.5, 0.5, 0.1), 0.088238, places=5
        )

    def test_zero_coupling_gives_zero(self):
        self.assertAlmostEqual(entropy.mutual_information_poisson(0.4, 0.7, 0.0), 0.0, places=12)

    def test_hatted_nonnegative_unhatted_nonpositive(self):
        for l11, l22, l12 in approximation_grid():
            if max(l11, l22) + l12 > 1.0:
                continue
            with self.subTest(l11=l11, l22=l22, l12=l12):
                self.assertGreaterEqual(entropy.mutual_information_poisson(l11, l22, l12), 0.0)
                self.assertLess(entropy.mutual_information_unhatted(l11, l22, l12), 0.0)

    def test_unhatted_is_minus_coupling(self):
        self.assertAlmostEqual(entropy.mutual_information_unhatted(0.5, 0.3, 0.07), -0.07, places=12)
        self.assertAlmostEqual(entropy.mutual_information_unhatted(0.5, 0.3, 0.0), 0.0, places=12)

    def test_symmetric_in_variables(self):
        self.assertAlmostEqual(
            entropy.mutual_information_poisson(0.3, 0.6, 0.05),
            entropy.mutual_information_poisson(0.6, 0.3, 0.05),
            places=12,
        )

    def test_coupling_kernel_matches_pair_mi(self):
        couplings = [0.0, 0.1, 0.4, 0.9]
        base_x = [0.9, 0.5, 0.0, 0.1]
        kernel = entropy.poisson_mi_from_coupling(couplings, base_x, 0.3)
        for c, a, value in zip(couplings, base_x, kernel):
            self.assertAlmostEqual(
                value, entropy.mutual_information_poisson(a, 0.3, c), places=9
            )

    def test_coupling_kernel_monotone_in_hatted_regime(self):
        couplings = np.linspace(0.0, 0.5, 11)
        kernel = entropy.poisson_mi_from_coupling(couplings, 0.5, 0.5)
        self.assertAlmostEqual(kernel[0], 0.0, places=12)
        self.assertTrue(np.all(np.diff(kernel) > 0))

    def test_coupling_kernel_depends_on_base_rates(self):
        crowded, sparse = entropy.poisson_mi_from_coupling([0.3, 0.3], [0.1, 0.7], 0.7)
        self.assertGreater(crowded, sparse)


class TestConditionalMutualInformation(unittest.TestCase):
    """CMI on count data under the Poisson approximation."""

    def setUp(self):
        rng = np.random.default_rng(11)
        t = 5000
        shared = rng.poisson(1.0, t)
        x = rng.poisson(1.0, t) + shared
        z = x + rng.poisson(1.0, t)
        y = z + rng.poisson(1.0, t)
        w = rng.poisson(1.0, t)
        self.counts = CountMatrix(np.vstack([x, y, z, w]))

    def star_counts(self, t=20000, seed=5):
        """Node 0 shares a latent stream with each of nodes 1, 2 and 3."""
        rng = np.random.default_rng(seed)
        links = rng.poisson(1.0, size=(3, t))
        hub = rng.poisson(3.0, t) + links.sum(axis=0)
        leaves = rng.poisson(1.0, size=(3, t)) + links
        return CountMatrix(np.vstack([hub, leaves]))

    def test_empty_condition_uses_rate_matrix_entries(self):
        for counts in (self.counts, self.star_counts()):
            rates = estimate_rate_matrix(counts)
            for x, y in ((0, 1), (0, 2), (1, 3)):
                with self.subTest(n=counts.n_variables, x=x, y=y):
                    expected = entropy.mutual_information_poisson(
                        rates.base_rate(x), rates.base_rate(y), rates.coupling(x, y)
                    )
                    got = entropy.conditional_mutual_information_poisson(x, y, [], counts)
                    self.assertAlmostEqual(got, expected, places=9)

    def test_hub_base_rate_is_reduced_by_its_couplings(self):
        rates = estimate_rate_matrix(self.star_counts())
        self.assertLess(rates.base_rate(0), rates.base_rate(1))
        self.assertAlmostEqual(
            rates.base_rate(0), 1.0 - sum(rates.coupling(0, j) for j in (1, 2, 3)), places=12
        )

    def test_explicit_rates_match_estimated(self):
        rates = estimate_rate_matrix(self.counts)
        self.assertEqual(
            entropy.conditional_mutual_information_poisson(0, 1, [2], self.counts, rates=rates),
            entropy.conditional_mutual_information_poisson(0, 1, [2], self.counts),
        )

    def test_rates_must_cover_counts(self):
        rates = estimate_rate_matrix(self.counts.take([0, 1]))
        with self.assertRaises(entropy.ConditioningError):
            entropy.conditional_mutual_information_poisson(0, 1, [], self.counts, rates=rates)

    def test_conditioning_on_mediator_removes_information(self):
        direct = entropy.conditional_mutual_information_poisson(0, 1, [], self.counts)
        mediated = entropy.conditional_mutual_information_poisson(0, 1, [2], self.counts)
        self.assertGreater(direct, 0.5)
        self.assertLess(mediated, 0.25 * direct)

    def test_independent_condition_leaves_information_unchanged(self):
        rng = np.random.default_rng(21)
        t = 20000
        shared = rng.poisson(1.0, t)
        x = rng.poisson(1.0, t) + shared
        y = rng.poisson(1.0, t) + shared
        z = rng.poisson(1.0, t)
        counts = CountMatrix(np.vstack([x, y, z]))
        rates = estimate_rate_matrix(counts)
        plain = entropy.conditional_mutual_information_poisson(0, 1, [], counts, rates=rates)
        given_z = entropy.conditional_mutual_information_poisson(0, 1, [2], counts, rates=rates)
        self.assertGreater(plain, 0.05)
        self.assertAlmostEqual(given_z, plain, delta=1e-3)

    def test_independent_pair_near_zero(self):
        counts = CountMatrix(np.random.default_rng(13).poisson(1.0, size=(3, 5000)))
        self.assertLess(entropy.conditional_mutual_information_poisson(0, 1, [], counts), 0.01)

    def test_constant_row_gives_zero(self):
        values = np.vstack([np.full(50, 3), np.arange(50) % 4, np.arange(50) % 3])
        counts = CountMatrix(values)
        self.assertEqual(entropy.conditional_mutual_information_poisson(0, 1, [2], counts), 0.0)

    def test_invalid_condition_sets(self):
        with self.assertRaises(entropy.ConditioningError):
            entropy.conditional_mutual_information_poisson(0, 0, [], self.counts)
        with self.assertRaises(entropy.ConditioningError):
            entropy.conditional_mutual_information_poisson(0, 1, [1], self.counts)


class TestGaussian(unittest.TestCase):
    """Gaussian entropy and CMI baseline."""

    def test_standard_normal_entropy(self):
        self.assertAlmostEqual(entropy.gaussian_entropy(np.eye(1)), 1.4189385, places=6)

    def test_bivariate_mi(self):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        self.assertAlmostEqual(entropy.gaussian_cmi(0, 1, [], cov), 0.143841, places=5)

    def test_cmi_matches_partial_correlation_kernel(self):
        cov = np.array([[2.0, 0.6, 0.8], [0.6, 1.5, 0.4], [0.8, 0.4, 1.0]])
        precision = np.linalg.inv(cov)
        rho = -precision[0, 1] / math.sqrt(precision[0, 0] * precision[1, 1])
        self.assertAlmostEqual(
            entropy.gaussian_cmi(0, 1, [2], cov),
            float(entropy.gaussian_mi_from_correlation([rho])[0]),
            places=10,
        )

    def test_singular_covariance_jittered(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])
        with self.assertLogs("poissonet.entropy", level="WARNING"):
            value = entropy.gaussian_entropy(cov)
        self.assertTrue(math.isfinite(value))

    def test_condition_must_exclude_pair(self):
        with self.assertRaises(entropy.ConditioningError):
            entropy.gaussian_cmi(0, 1, [0], np.eye(3))


if __name__ == "__main__":
    unittest.main()
