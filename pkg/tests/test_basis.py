import unittest
from unittest import mock

import numpy as np

from mixchaos import basis, ftt, types
from mixchaos.indexing import GradedLexOrder

from tests import helpers

MOMENT_TABLE = ftt.moment_table


def _moment_matrix(matrix) -> basis.MomentMatrix:
    mixture = helpers.single_gaussian([0.0], [[1.0]])
    return basis.MomentMatrix(
        GradedLexOrder(1, 1),
        np.array(matrix, dtype=float),
        ftt.moment_table(mixture, 1),
    )


class MomentMatrixTests(unittest.TestCase):
    def test_entries_are_moments_of_index_sums(self):
        mixture = helpers.random_mixture(2, 2, 31)
        matrix = basis.build_moment_matrix(mixture, 2)
        order = matrix.order
        table = matrix.table
        for row in range(order.size):
            for col in range(order.size):
                self.assertEqual(
                    matrix.matrix[row, col],
                    table.value(order.indices[row] + order.indices[col]),
                )

    def test_matrix_is_symmetric_with_unit_corner(self):
        matrix = basis.build_moment_matrix(helpers.random_mixture(3, 2, 32), 2).matrix
        np.testing.assert_array_equal(matrix, matrix.T)
        self.assertEqual(matrix[0, 0], 1.0)

    def test_short_table_is_rejected(self):
        mixture = helpers.random_mixture(2, 1, 33)
        with self.assertRaises(types.ValidationException):
            basis.build_moment_matrix(mixture, 3, table=ftt.moment_table(mixture, 2))


class FactorTests(unittest.TestCase):
    def test_asymmetric_matrix_is_rejected(self):
        with self.assertRaisesRegex(types.ValidationException, "not symmetric"):
            basis.factor(_moment_matrix([[1.0, 0.5], [0.4, 1.0]]))

    def test_singular_matrix_gets_jitter(self):
        with self.assertLogs("mixchaos.basis", level="WARNING"):
            result = basis.factor(_moment_matrix([[1.0, 1.0], [1.0, 1.0]]))
        self.assertGreater(result.diagnostics.jitter, 0.0)
        self.assertEqual(len(result.diagnostics.warnings), 1)
        self.assertEqual(result.chol[0, 0], 1.0)

    def test_indefinite_matrix_raises(self):
        with self.assertRaises(types.IllConditionedMoments) as context:
            basis.factor(_moment_matrix([[1.0, 0.0], [0.0, -0.5]]))
        self.assertGreater(context.exception.jitter, 0.0)
        self.assertEqual(context.exception.exit_code, types.ExitCode.NUMERICAL)


class BasisSetTests(unittest.TestCase):
    def setUp(self):
        self.mixture = helpers.random_mixture(2, 3, 41)
        self.basis = basis.build_basis(self.mixture, 3)
        return super().setUp()

    def test_size_and_dimensions(self):
        self.assertEqual(self.basis.size, 10)
        self.assertEqual(self.basis.dim, 2)
        self.assertEqual(self.basis.max_degree, 3)

    def test_factor_is_lower_triangular_with_positive_diagonal(self):
        np.testing.assert_array_equal(self.basis.chol, np.tril(self.basis.chol))
        self.assertTrue(np.all(np.diag(self.basis.chol) > 0))

    def test_exact_gram_is_identity(self):
        self.assertLess(self.basis.gram_residual(), 1e-8)
        self.assertLess(self.basis.reconstruction_error(), 1e-12)

    def test_first_basis_function_is_one(self):
        points = self.mixture.sample(50, 2)
        np.testing.assert_array_equal(self.basis.evaluate(points)[:, 0], np.ones(50))

    def test_empirical_gram_is_close_to_identity(self):
        gram = self.basis.empirical_gram(self.mixture.sample(1_000_000, 3))
        self.assertLess(float(np.abs(gram - np.eye(self.basis.size)).max()), 0.1)

    def test_single_point_evaluation(self):
        point = np.array([0.3, -0.2])
        np.testing.assert_allclose(
            self.basis.evaluate(point), self.basis.evaluate(point[np.newaxis, :])[0]
        )

    def test_dimension_mismatch(self):
        with self.assertRaises(types.DimensionMismatch):
            self.basis.evaluate([0.0, 0.0, 0.0])

    def test_degree_zero_basis_is_constant(self):
        constant = basis.build_basis(self.mixture, 0)
        self.assertEqual(constant.size, 1)
        np.testing.assert_array_equal(constant.evaluate([[1.0, 2.0]]), [[1.0]])

    def test_degree_above_four_is_rejected(self):
        with self.assertRaisesRegex(types.ValidationException, "between 0 and 4"):
            basis.build_basis(self.mixture, 5)

    @mock.patch("mixchaos.basis.ftt.moment_table")
    def test_workers_are_passed_to_moment_engine(self, mock_table: mock.MagicMock):
        mock_table.side_effect = MOMENT_TABLE
        basis.build_basis(self.mixture, 1, workers=3)
        self.assertEqual(mock_table.call_args[0][1:], (1, 3))


if __name__ == "__main__":
    unittest.main()
