# -*- coding: utf-8 -*-
"""Brute-force moment oracles used to check the tensor-train engine."""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal

from mixchaos import types, util
from mixchaos.ftt import MomentTable
from mixchaos.gmm import GaussianComponent, GaussianMixture
from mixchaos.indexing import MultiIndex, format_exponents

MAX_QUADRATURE_DIM = 4
NODE_SYMMETRY_TOLERANCE = 1e-13
MC_CHUNK = 100_000
MIN_MC_SAMPLES = 10_000
MC_STANDARD_ERRORS = 5.0

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def gauss_hermite(count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``E[f(eta)]``, ``eta ~ N(0, 1)`` (Golub-Welsch).

    The nodes are the eigenvalues of the Jacobi matrix of the probabilists'
    Hermite recurrence; the weights are the squared first components of the
    normalized eigenvectors, so they sum to one.
    """
    if count < 1:
        raise types.ValidationException(f"Need at least one node, got {count}.")
    off_diagonal = np.sqrt(np.arange(1, count, dtype=float))
    nodes, vectors = eigh_tridiagonal(np.zeros(count), off_diagonal)
    weights = vectors[0] ** 2
    scale = max(1.0, float(np.max(np.abs(nodes))))
    if np.max(np.abs(nodes + nodes[::-1])) > NODE_SYMMETRY_TOLERANCE * scale * count:
        raise types.NumericalException("Gauss-Hermite nodes are not symmetric.")
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def quad_moment(
    alpha: MultiIndex, component: GaussianComponent, nodes: Optional[int] = None
) -> float:
    """``E[(A eta + mu)^alpha]`` by tensorized Gauss-Hermite quadrature.

    :param alpha: The moment to compute
    :param component: The Gaussian component
    :param nodes: Nodes per dimension; defaults to the smallest exact count
    :raises types.ValidationException: If the dimension exceeds 4 or there are
      too few nodes for the quadrature to be exact
    """
    dim = component.dim
    if dim > MAX_QUADRATURE_DIM:
        raise types.ValidationException(
            f"Tensor quadrature is limited to d <= {MAX_QUADRATURE_DIM}, got d={dim}."
        )
    if alpha.dim != dim:
        raise types.DimensionMismatch(
            f"Index of dimension {alpha.dim} for a component of dimension {dim}."
        )
    minimum = alpha.degree // 2 + 1
    if nodes is None:
        nodes = minimum
    elif nodes < minimum:
        raise types.ValidationException(
            f"{nodes} nodes cannot integrate degree {alpha.degree} exactly."
        )
    points, weights = gauss_hermite(nodes)
    grid = np.array(list(itertools.product(points, repeat=dim)))
    grid_weights = np.prod(
        np.array(list(itertools.product(weights, repeat=dim))), axis=1
    )
    samples = component.mean + grid @ component.chol.T
    values = np.prod(samples ** alpha.as_array().astype(float), axis=1)
    return float(grid_weights @ values)


def quad_mixture_moment(
    alpha: MultiIndex, gmm: GaussianMixture, nodes: Optional[int] = None
) -> float:
    return float(
        sum(
            weight * quad_moment(alpha, component, nodes)
            for weight, component in zip(gmm.weights, gmm.components)
        )
    )


def mc_moments(
    alphas: Sequence[MultiIndex],
    gmm: GaussianMixture,
    count: int,
    seed: Union[int, np.random.Generator],
) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimates and standard errors of several moments at once.

    Samples are drawn in chunks from one stream, so the result depends only
    on ``seed`` and ``count``.
    """
    if count < MIN_MC_SAMPLES:
        raise types.ValidationException(
            f"Monte Carlo oracles need at least {MIN_MC_SAMPLES} samples, got {count}."
        )
    exponents = np.array([alpha.exponents for alpha in alphas], dtype=float)
    rng = util.make_rng(seed)
    estimates = np.zeros(len(alphas))
    squares = np.zeros(len(alphas))
    seen = 0
    # Running mean and sum of squared deviations, merged chunk by chunk
    for start in range(0, count, MC_CHUNK):
        size = min(MC_CHUNK, count - start)
        points = gmm.sample(size, rng)
        powers = points[:, np.newaxis, :] ** exponents[np.newaxis, :, :]
        values = np.prod(powers, axis=2)
        chunk_mean = values.mean(axis=0)
        chunk_squares = ((values - chunk_mean) ** 2).sum(axis=0)
        delta = chunk_mean - estimates
        total = seen + size
        estimates = estimates + delta * size / total
        squares = squares + chunk_squares + delta ** 2 * seen * size / total
        seen = total
    errors = np.sqrt(squares / (count - 1)) / np.sqrt(count)
    constant = exponents.sum(axis=1) == 0
    estimates[constant] = 1.0
    errors[constant] = 0.0
    return estimates, errors


def mc_moment(
    alpha: MultiIndex,
    gmm: GaussianMixture,
    count: int,
    seed: Union[int, np.random.Generator],
) -> Tuple[float, float]:
    """Sample mean of ``xi^alpha`` and its estimated standard error."""
    estimates, errors = mc_moments([alpha], gmm, count, seed)
    return float(estimates[0]), float(errors[0])


@dataclass
class Discrepancy:
    __slots__ = ("alpha", "engine", "oracle", "discrepancy", "standard_error")
    alpha: MultiIndex
    engine: float
    oracle: float
    discrepancy: float
    standard_error: float


@dataclass
class VerificationReport:
    """Result of checking a moment table against an oracle.

    For quadrature the discrepancy is ``|engine - oracle| / max(|oracle|, 1)``;
    for Monte Carlo it is measured in estimated standard errors.
    """

    __slots__ = ("method", "tolerance", "samples", "rows")
    method: str
    tolerance: float
    samples: int
    rows: List[Discrepancy]

    @property
    def max_discrepancy(self) -> float:
        return max((row.discrepancy for row in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance

    def failures(self) -> List[Discrepancy]:
        return [row for row in self.rows if row.discrepancy > self.tolerance]

    def render(self) -> str:
        lines = [
            f"Oracle: {self.method}",
            f"Moments checked: {len(self.rows)}",
            f"Max discrepancy: {self.max_discrepancy!r} (tolerance {self.tolerance!r})",
        ]
        for row in self.failures():
            lines.append(
                f"  {format_exponents(row.alpha.exponents)}: engine {row.engine!r}, "
                f"oracle {row.oracle!r}"
            )
        return "\n".join(lines)

    def check(self) -> None:
        """:raises types.OracleMismatch: If any moment exceeds the tolerance"""
        if not self.passed:
            raise types.OracleMismatch(
                f"{len(self.failures())} of {len(self.rows)} moments disagree with "
                f"the {self.method} oracle.",
                self.render(),
            )


def verify_moments(
    table: MomentTable,
    gmm: GaussianMixture,
    seed: int,
    tolerance: float = 1e-8,
    mc_samples: int = 1_000_000,
    mc_count: int = 50,
) -> VerificationReport:
    """Check ``table`` against quadrature (``d <= 4``) or Monte Carlo.

    With Monte Carlo, ``mc_count`` randomly chosen nonconstant moments are
    checked and the tolerance is five standard errors.
    """
    indices = table.order.indices
    if gmm.dim <= MAX_QUADRATURE_DIM:
        rows = []
        for alpha, value in zip(indices, table.values):
            oracle = quad_mixture_moment(alpha, gmm)
            relative = abs(value - oracle) / max(abs(oracle), 1.0)
            rows.append(Discrepancy(alpha, float(value), oracle, relative, 0.0))
        report = VerificationReport("gauss-hermite", tolerance, 0, rows)
    else:
        rng = util.make_rng(seed)
        count = min(mc_count, len(indices) - 1)
        chosen = np.sort(
            rng.choice(np.arange(1, len(indices)), size=count, replace=False)
        )
        alphas = [indices[position] for position in chosen]
        estimates, errors = mc_moments(alphas, gmm, mc_samples, rng)
        rows = []
        for alpha, position, estimate, error in zip(alphas, chosen, estimates, errors):
            engine = float(table.values[position])
            spread = abs(engine - estimate)
            if error > 0:
                spread /= error
            rows.append(
                Discrepancy(alpha, engine, float(estimate), float(spread), float(error))
            )
        report = VerificationReport("monte-carlo", MC_STANDARD_ERRORS, mc_samples, rows)
    logger.info(
        "Verified %d moments by %s, max discrepancy %g",
        len(report.rows),
        report.method,
        report.max_discrepancy,
    )
    return report
