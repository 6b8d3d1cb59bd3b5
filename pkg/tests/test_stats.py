import pathlib
import tempfile
import unittest

import numpy as np
from scipy.integrate import trapezoid

from mixchaos import basis, stats, types, util

from tests import helpers


class SurrogateFixture(unittest.TestCase):
    def setUp(self):
        self.mixture = helpers.random_mixture(2, 2, 61)
        self.basis = basis.build_basis(self.mixture, 2)
        self.coeffs = np.array([1.5, 0.4, -0.3, 0.2, 0.0, 0.1])
        self.model = stats.SurrogateModel(self.basis, self.coeffs)
        return super().setUp()


class MomentTests(SurrogateFixture):
    def test_mean_is_constant_coefficient(self):
        self.assertEqual(stats.mean(self.model), 1.5)

    def test_variance_is_sum_of_squares(self):
        self.assertAlmostEqual(stats.variance(self.model), 0.3)
        self.assertAlmostEqual(stats.standard_deviation(self.model), 0.3 ** 0.5)

    def test_moments_match_sampling(self):
        values = self.model.evaluate(self.mixture.sample(400_000, 5))
        self.assertAlmostEqual(float(values.mean()), 1.5, delta=0.01)
        self.assertAlmostEqual(float(values.var()), 0.3, delta=0.02)

    def test_coefficient_count_must_match_basis(self):
        with self.assertRaises(types.DimensionMismatch):
            stats.SurrogateModel(self.basis, np.ones(5))

    def test_single_point_evaluation(self):
        point = np.array([0.1, 0.2])
        batch = self.model.evaluate(point[np.newaxis, :])
        self.assertAlmostEqual(self.model.evaluate(point), float(batch[0]))


class RelativeErrorTests(unittest.TestCase):
    def test_error(self):
        phi = np.eye(2)
        self.assertAlmostEqual(
            stats.relative_error(phi, np.array([3.0, 4.0]), np.array([3.0, 0.0])),
            4.0 / 3.0,
        )

    def test_exact_fit(self):
        phi = np.array([[1.0, 2.0], [3.0, 4.0]])
        coeffs = np.array([0.5, -1.0])
        self.assertEqual(stats.relative_error(phi, coeffs, phi @ coeffs), 0.0)

    def test_zero_outputs_are_rejected(self):
        with self.assertRaises(types.ValidationException):
            stats.relative_error(np.eye(2), np.ones(2), np.zeros(2))


class DensityTests(unittest.TestCase):
    def setUp(self):
        self.values = util.make_rng(3).standard_normal(100_000)
        return super().setUp()

    def test_density_integrates_to_one(self):
        estimate = stats.density_from_values(self.values, bins=50)
        self.assertAlmostEqual(
            float(trapezoid(estimate.density, estimate.grid)), 1.0, places=2
        )
        self.assertEqual(int(estimate.counts.sum()), 100_000)
        self.assertEqual(estimate.edges.shape, (51,))
        self.assertEqual(estimate.grid.shape, (stats.GRID_POINTS,))
        self.assertIsNone(estimate.values)

    def test_density_peaks_near_the_normal_density(self):
        estimate = stats.density_from_values(self.values)
        peak = float(estimate.density[np.argmin(np.abs(estimate.grid))])
        self.assertAlmostEqual(peak, 1.0 / np.sqrt(2 * np.pi), delta=0.02)

    def test_constant_values_give_single_bin(self):
        estimate = stats.density_from_values(np.full(100, 2.0), keep_values=True)
        np.testing.assert_array_equal(estimate.edges, [1.5, 2.5])
        np.testing.assert_array_equal(estimate.counts, [100])
        self.assertEqual(estimate.values.shape, (100,))

    def test_silverman_bandwidth(self):
        expected = 0.9 * float(np.std(self.values, ddof=1)) * 100_000 ** (-0.2)
        self.assertAlmostEqual(
            stats.silverman_bandwidth(self.values), expected, delta=0.005
        )

    def test_l1_distance(self):
        first = stats.density_from_values(self.values)
        self.assertAlmostEqual(stats.density_l1_distance(first, first), 0.0)
        shifted = stats.density_from_values(self.values + 3.0)
        self.assertGreater(stats.density_l1_distance(first, shifted), 1.2)

    def test_bimodal_histogram_has_two_modes(self):
        values = np.concatenate([self.values - 4.0, self.values[:60_000] + 4.0])
        estimate = stats.density_from_values(values, bins=100)
        modes = stats.histogram_modes(estimate.counts)
        self.assertEqual(len(modes), 2)
        centers = estimate.centers[modes]
        self.assertAlmostEqual(float(centers[0]), -4.0, delta=0.5)
        self.assertAlmostEqual(float(centers[1]), 4.0, delta=0.5)


class SurrogateDensityTests(SurrogateFixture):
    def test_sample_count_floor(self):
        with self.assertRaises(types.ValidationException):
            stats.density(self.model, self.mixture, 9_999, 0)

    def test_deterministic_for_a_seed(self):
        first = stats.density(self.model, self.mixture, 30_000, 4)
        second = stats.density(self.model, self.mixture, 30_000, 4)
        np.testing.assert_array_equal(first.density, second.density)
        np.testing.assert_array_equal(first.counts, second.counts)


class PrecisionTests(unittest.TestCase):
    def test_identical_values_agree_fully(self):
        self.assertEqual(stats.significant_digits_agree(3.14159, 3.14159), 15)

    def test_rounded_value(self):
        self.assertEqual(stats.significant_digits_agree(3.1416, 3.14159), 5)

    def test_no_agreement(self):
        self.assertEqual(stats.significant_digits_agree(1.0, 2.0), 0)
        self.assertEqual(stats.significant_digits_agree(1.0, 0.0), 0)

    def test_table_underlines_last_agreeing_digit(self):
        table = stats.format_precision_table(
            390, 1.23456, [(100, 1.2), (10_000, 1.2341)]
        )
        lines = table.splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[0].startswith("method"))
        self.assertIn("390", lines[1])
        self.assertIn("1.2" + stats.UNDERLINE + "000", lines[2])
        self.assertIn("1.234" + stats.UNDERLINE + "1", lines[2])

    def test_styled_table_uses_terminal_underline(self):
        table = stats.format_precision_table(390, 1.23456, [(100, 1.2)], styled=True)
        self.assertIn("\x1b[4m", table)
        self.assertNotIn(stats.UNDERLINE, table)


class CoefficientFileTests(SurrogateFixture):
    def setUp(self):
        super().setUp()
        self.directory = tempfile.TemporaryDirectory()
        self.path = pathlib.Path(self.directory.name) / "coefficients.csv"

    def tearDown(self):
        self.directory.cleanup()
        return super().tearDown()

    def _write(self, rows, header=stats.COEFFICIENT_COLUMNS):
        util.write_csv(self.path, header, rows)

    def test_saved_coefficients_load_back(self):
        self._write(stats.coefficient_rows(self.model))
        loaded = stats.load_coefficients(self.path, self.basis)
        np.testing.assert_array_equal(loaded.coeffs, self.coeffs)
        self.assertEqual(loaded.provenance, {"coefficients": str(self.path)})

    def test_rows_follow_graded_order(self):
        rows = stats.coefficient_rows(self.model)
        self.assertEqual([row[1] for row in rows[:3]], ["0;0", "1;0", "0;1"])

    def test_bad_header(self):
        self._write(stats.coefficient_rows(self.model), header=("a", "b", "c"))
        with self.assertRaisesRegex(types.TableFormatException, "line 1"):
            stats.load_coefficients(self.path, self.basis)

    def test_wrong_count(self):
        self._write(stats.coefficient_rows(self.model)[:-1])
        with self.assertRaises(types.DimensionMismatch):
            stats.load_coefficients(self.path, self.basis)

    def test_bad_value_reports_line(self):
        rows = stats.coefficient_rows(self.model)
        rows[2] = (2, "0;1", "oops")
        self._write(rows)
        with self.assertRaisesRegex(types.TableFormatException, "line 4"):
            stats.load_coefficients(self.path, self.basis)

    def test_exponents_out_of_place(self):
        rows = stats.coefficient_rows(self.model)
        rows[1], rows[2] = rows[2], rows[1]
        self._write(rows)
        with self.assertRaisesRegex(types.TableFormatException, "out of place"):
            stats.load_coefficients(self.path, self.basis)


if __name__ == "__main__":
    unittest.main()
