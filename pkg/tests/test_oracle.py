import unittest

import numpy as np

from mixchaos import ftt, oracle, types
from mixchaos.gmm import GaussianComponent
from mixchaos.indexing import MultiIndex

from tests import helpers


class GaussHermiteTests(unittest.TestCase):
    def test_weights_sum_to_one(self):
        _, weights = oracle.gauss_hermite(7)
        self.assertAlmostEqual(float(weights.sum()), 1.0, places=14)

    def test_nodes_are_symmetric(self):
        nodes, _ = oracle.gauss_hermite(6)
        np.testing.assert_array_equal(nodes, -nodes[::-1])

    def test_standard_normal_moments_are_exact(self):
        nodes, weights = oracle.gauss_hermite(5)
        for power, expected in enumerate(ftt.standard_normal_moments(9)):
            self.assertAlmostEqual(float(weights @ nodes ** power), expected, places=10)

    def test_at_least_one_node(self):
        with self.assertRaises(types.ValidationException):
            oracle.gauss_hermite(0)


class QuadratureTests(unittest.TestCase):
    def test_quadrature_matches_closed_form(self):
        component = GaussianComponent([0.5, -1.0], [[1.0, 0.3], [0.3, 0.5]])
        value = oracle.quad_moment(MultiIndex((1, 1)), component)
        self.assertAlmostEqual(value, 0.3 + 0.5 * -1.0, places=13)

    def test_quadrature_refuses_high_dimension(self):
        component = GaussianComponent(np.zeros(5), np.eye(5))
        with self.assertRaisesRegex(types.ValidationException, "d <= 4"):
            oracle.quad_moment(MultiIndex.zero(5), component)

    def test_quadrature_refuses_too_few_nodes(self):
        component = GaussianComponent([0.0], [[1.0]])
        with self.assertRaises(types.ValidationException):
            oracle.quad_moment(MultiIndex((6,)), component, nodes=3)

    def test_randomized_mixtures_agree_with_tensor_trains(self):
        for trial in range(20):
            dim = 1 + trial % 4
            mixture = helpers.random_mixture(dim, 1 + trial % 3, 100 + trial)
            table = ftt.moment_table(mixture, 3)
            for alpha, value in zip(table.order.indices, table.values):
                expected = oracle.quad_mixture_moment(alpha, mixture)
                self.assertLessEqual(
                    abs(value - expected) / max(abs(expected), 1.0),
                    1e-8,
                    f"moment {alpha} of trial {trial}",
                )


class MonteCarloTests(unittest.TestCase):
    def setUp(self):
        self.mixture = helpers.random_mixture(2, 2, 3)
        return super().setUp()

    def test_constant_moment_is_exact(self):
        estimate, error = oracle.mc_moment(MultiIndex.zero(2), self.mixture, 10_000, 1)
        self.assertEqual((estimate, error), (1.0, 0.0))

    def test_estimates_are_within_standard_errors(self):
        alphas = [MultiIndex((1, 0)), MultiIndex((1, 1)), MultiIndex((2, 1))]
        estimates, errors = oracle.mc_moments(alphas, self.mixture, 200_000, 8)
        for alpha, estimate, error in zip(alphas, estimates, errors):
            exact = oracle.quad_mixture_moment(alpha, self.mixture)
            self.assertLess(abs(estimate - exact), 5 * error)

    def test_chunked_statistics_match_direct_ones(self):
        alpha = MultiIndex((1, 2))
        estimate, error = oracle.mc_moment(alpha, self.mixture, 250_000, 4)
        # Same stream, drawn in the same chunk sizes
        rng = np.random.Generator(np.random.Philox(4))
        chunks = [self.mixture.sample(size, rng) for size in (100_000, 100_000, 50_000)]
        direct = np.concatenate([chunk[:, 0] * chunk[:, 1] ** 2 for chunk in chunks])
        self.assertAlmostEqual(estimate, float(direct.mean()), places=10)
        self.assertAlmostEqual(
            error, float(direct.std(ddof=1) / np.sqrt(direct.size)), places=10
        )

    def test_too_few_samples_are_rejected(self):
        with self.assertRaises(types.ValidationException):
            oracle.mc_moment(MultiIndex((1, 0)), self.mixture, 100, 1)


class VerifyMomentsTests(unittest.TestCase):
    def test_quadrature_verification_passes(self):
        mixture = helpers.random_mixture(2, 2, 21)
        report = oracle.verify_moments(ftt.moment_table(mixture, 2), mixture, seed=0)
        self.assertEqual(report.method, "gauss-hermite")
        self.assertTrue(report.passed)
        self.assertLess(report.max_discrepancy, 1e-8)
        report.check()

    def test_corrupted_moment_is_reported(self):
        mixture = helpers.random_mixture(2, 2, 21)
        table = ftt.moment_table(mixture, 2)
        table.values[4] += 1e-3
        report = oracle.verify_moments(table, mixture, seed=0)
        self.assertFalse(report.passed)
        self.assertEqual(len(report.failures()), 1)
        self.assertIn("engine", report.render())
        with self.assertRaises(types.OracleMismatch) as context:
            report.check()
        self.assertEqual(context.exception.exit_code, types.ExitCode.NUMERICAL)

    def test_monte_carlo_is_used_above_four_dimensions(self):
        mixture = helpers.random_mixture(5, 2, 22)
        report = oracle.verify_moments(
            ftt.moment_table(mixture, 1),
            mixture,
            seed=3,
            mc_samples=100_000,
            mc_count=10,
        )
        self.assertEqual(report.method, "monte-carlo")
        self.assertEqual(len(report.rows), 10)
        self.assertEqual(report.tolerance, oracle.MC_STANDARD_ERRORS)


if __name__ == "__main__":
    unittest.main()
