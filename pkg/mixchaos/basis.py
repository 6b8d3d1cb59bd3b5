# -*- coding: utf-8 -*-
"""Orthonormal polynomial bases ``Psi(xi) = L^{-1} b(xi)`` from the moment matrix."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from mixchaos import ftt, indexing, types
from mixchaos.gmm import AffineMap, GaussianMixture
from mixchaos.indexing import GradedLexOrder

MAX_ORDER = 4
JITTER_BASE = 1e-12
JITTER_STEPS = 5
SYMMETRY_TOLERANCE = 1e-12

logger = logging.getLogger(__name__)


class MomentMatrix:
    """``M_ij = m_{alpha_i + alpha_j}`` over the graded-lex monomials of degree ``<= p``."""

    __slots__ = ("order", "matrix", "table")

    order: GradedLexOrder
    matrix: np.ndarray
    table: ftt.MomentTable

    def __init__(
        self, order: GradedLexOrder, matrix: np.ndarray, table: ftt.MomentTable
    ) -> None:
        self.order = order
        self.matrix = matrix
        self.table = table

    @property
    def size(self) -> int:
        return self.order.size


def build_moment_matrix(
    gmm: GaussianMixture,
    max_degree: int,
    workers: int = 1,
    table: Optional[ftt.MomentTable] = None,
) -> MomentMatrix:
    """Assemble ``M`` for ``gmm``, which should already be standardized.

    Every distinct moment is computed once by the tensor-train engine; row
    ``i`` is filled for ``j >= i`` and mirrored.
    """
    if table is None:
        table = ftt.moment_table(gmm, max_degree, workers)
    elif table.basis_degree < max_degree or table.order.dim != gmm.dim:
        raise types.ValidationException(
            "The moment table does not cover the requested basis degree."
        )
    order = GradedLexOrder(gmm.dim, max_degree)
    exponents = order.exponents.astype(np.int64)
    matrix = np.empty((order.size, order.size))
    for row in range(order.size):
        values = table.lookup(exponents[row] + exponents[row:])
        matrix[row, row:] = values
        matrix[row:, row] = values
    logger.info("Assembled %d x %d moment matrix", order.size, order.size)
    return MomentMatrix(order, matrix, table)


@dataclass
class BasisDiagnostics:
    __slots__ = ("jitter", "min_diagonal", "max_diagonal", "warnings")
    jitter: float
    min_diagonal: float
    max_diagonal: float
    warnings: List[str]

    @property
    def diagonal_ratio(self) -> float:
        return self.max_diagonal / self.min_diagonal


class BasisSet:
    """The orthonormal basis of one mixture, ready to evaluate in original coordinates."""

    __slots__ = ("order", "chol", "standardization", "diagnostics", "moment_matrix")

    order: GradedLexOrder
    chol: np.ndarray
    standardization: AffineMap
    diagnostics: BasisDiagnostics
    moment_matrix: MomentMatrix

    def __init__(
        self,
        order: GradedLexOrder,
        chol: np.ndarray,
        standardization: AffineMap,
        diagnostics: BasisDiagnostics,
        moment_matrix: MomentMatrix,
    ) -> None:
        self.order = order
        self.chol = chol
        self.standardization = standardization
        self.diagnostics = diagnostics
        self.moment_matrix = moment_matrix

    @property
    def size(self) -> int:
        return self.order.size

    @property
    def dim(self) -> int:
        return self.order.dim

    @property
    def max_degree(self) -> int:
        return self.order.max_degree

    def evaluate(self, points: Union[np.ndarray, List[float]]) -> np.ndarray:
        """``Psi`` at one point (shape ``(N,)``) or each row of a batch (``(n, N)``).

        :param points: Parameter values in original, unstandardized coordinates
        """
        values = np.asarray(points, dtype=float)
        single = values.ndim == 1
        batch = np.atleast_2d(values)
        if batch.shape[1] != self.dim:
            raise types.DimensionMismatch(
                f"Point has dimension {batch.shape[1]}, the basis expects {self.dim}."
            )
        monomials = indexing.monomial_vector(
            self.order, self.standardization.forward(batch)
        )
        result = solve_triangular(self.chol, monomials.T, lower=True).T
        return result[0] if single else result

    def gram_residual(self) -> float:
        """``||L^{-1} M L^{-T} - I||_F``, computed with triangular solves."""
        left = solve_triangular(self.chol, self.moment_matrix.matrix, lower=True)
        gram = solve_triangular(self.chol, left.T, lower=True)
        return float(np.linalg.norm(gram - np.eye(self.size)))

    def reconstruction_error(self) -> float:
        """``||L L^T - M||_F / ||M||_F``."""
        matrix = self.moment_matrix.matrix
        return float(
            np.linalg.norm(self.chol @ self.chol.T - matrix) / np.linalg.norm(matrix)
        )

    def empirical_gram(self, points: np.ndarray) -> np.ndarray:
        phi = self.evaluate(points)
        return phi.T @ phi / phi.shape[0]


def factor(
    moment_matrix: MomentMatrix, standardization: Optional[AffineMap] = None
) -> BasisSet:
    """Cholesky-factor ``M``, escalating diagonal jitter when it is not numerically PD.

    Jitter ``1e-12 * tr(M) / N * 10^k`` for ``k = 0..4`` is added to every
    diagonal entry except the first, so ``Psi_0`` stays exactly 1.

    :raises types.ValidationException: If ``M`` is not symmetric
    :raises types.IllConditionedMoments: If no jitter level makes ``M`` factor
    """
    matrix = moment_matrix.matrix
    size = matrix.shape[0]
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOLERANCE * scale:
        raise types.ValidationException("The moment matrix is not symmetric.")
    if standardization is None:
        standardization = AffineMap.identity(moment_matrix.order.dim)
    base = JITTER_BASE * float(np.trace(matrix)) / size
    levels = [0.0] + [base * 10 ** step for step in range(JITTER_STEPS)]
    tail = np.arange(1, size)
    chol = None
    jitter = 0.0
    for jitter in levels:
        trial = matrix.copy()
        trial[tail, tail] += jitter
        try:
            chol = cholesky(trial, lower=True)
        except LinAlgError:
            continue
        if np.all(np.isfinite(chol)) and np.all(np.diag(chol) > 0):
            break
        chol = None
    if chol is None:
        raise types.IllConditionedMoments(
            f"The moment matrix is not positive definite even with jitter {jitter!r}; "
            "lower the basis degree.",
            jitter=jitter,
        )
    diagonal = np.diag(chol)
    warnings = []
    if jitter > 0:
        message = f"Moment matrix needed diagonal jitter {jitter!r} to factor."
        logger.warning(message)
        warnings.append(message)
    diagnostics = BasisDiagnostics(
        jitter, float(diagonal.min()), float(diagonal.max()), warnings
    )
    logger.info(
        "Factored moment matrix: min diag(L) %g, max diag(L) %g",
        diagnostics.min_diagonal,
        diagnostics.max_diagonal,
    )
    return BasisSet(
        moment_matrix.order, chol, standardization, diagnostics, moment_matrix
    )


def build_basis(gmm: GaussianMixture, max_degree: int, workers: int = 1) -> BasisSet:
    """Standardize ``gmm``, compute its moment matrix and factor it.

    :param gmm: The mixture in original coordinates
    :param max_degree: The total degree ``p`` of the basis, at most 4
    :param workers: Threads used for the moment computation
    """
    if not 0 <= max_degree <= MAX_ORDER:
        raise types.ValidationException(
            f"Basis degree must be between 0 and {MAX_ORDER}, got {max_degree}."
        )
    affine, standardized = gmm.standardize()
    moment_matrix = build_moment_matrix(standardized, max_degree, workers)
    return factor(moment_matrix, affine)
