# -*- coding: utf-8 -*-
"""Adaptive sparse regression of expansion coefficients.

Initial samples come from a rank-revealing (column-pivoted) QR of the
candidate design matrix, the support from CoSaMP, and further samples from a
D-optimal criterion with Sherman-Morrison updates of the support Gram inverse.
"""

import dataclasses
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq, pinvh, qr

from mixchaos import stats, types, util
from mixchaos.basis import BasisSet
from mixchaos.gmm import GaussianMixture

MIN_SPARSITY = 5
SAMPLES_PER_TERM = 4
DRIFT_TOLERANCE = 1e-6
DENOMINATOR_FLOOR = 1e-12

Evaluator = Callable[[np.ndarray], np.ndarray]

logger = logging.getLogger(__name__)


class CandidatePool:
    """Candidate samples ``Xi_0`` with their basis values and, when known, outputs.

    In model mode outputs are computed on demand by ``evaluator`` and counted;
    in offline mode every candidate has a known output.
    """

    points: np.ndarray
    phi: np.ndarray
    outputs: np.ndarray
    evaluator: Optional[Evaluator]
    evaluations: int

    def __init__(
        self,
        points: np.ndarray,
        phi: np.ndarray,
        outputs: Optional[np.ndarray] = None,
        evaluator: Optional[Evaluator] = None,
    ) -> None:
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.phi = np.atleast_2d(np.asarray(phi, dtype=float))
        if self.phi.shape[0] != self.points.shape[0]:
            raise types.ValidationException(
                f"{self.points.shape[0]} candidate points but "
                f"{self.phi.shape[0]} rows of basis values."
            )
        if outputs is None:
            if evaluator is None:
                raise types.ValidationException(
                    "A candidate pool needs either known outputs or an evaluator."
                )
            self.outputs = np.full(self.size, np.nan)
        else:
            self.outputs = np.array(outputs, dtype=float)
            if self.outputs.shape != (self.size,):
                raise types.ValidationException(
                    f"{self.size} candidates but {self.outputs.shape[0]} outputs."
                )
        self.evaluator = evaluator
        self.evaluations = 0

    @classmethod
    def from_model(
        cls,
        basis: BasisSet,
        gmm: GaussianMixture,
        evaluator: Evaluator,
        size: int,
        seed: Union[int, np.random.Generator],
    ) -> "CandidatePool":
        """Draw ``size`` i.i.d. mixture samples; outputs are simulated on demand."""
        points = gmm.sample(size, seed)
        return cls(points, basis.evaluate(points), evaluator=evaluator)

    @classmethod
    def from_table(
        cls, basis: BasisSet, points: np.ndarray, outputs: np.ndarray
    ) -> "CandidatePool":
        return cls(points, basis.evaluate(points), outputs=outputs)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def output(self, index: int) -> float:
        if np.isnan(self.outputs[index]):
            if self.evaluator is None:
                raise types.ValidationException(
                    f"Candidate {index} has no known output."
                )
            point = self.points[index][np.newaxis, :]
            self.outputs[index] = float(self.evaluator(point)[0])
            self.evaluations += 1
        return float(self.outputs[index])

    def outputs_for(self, indices: Sequence[int]) -> np.ndarray:
        return np.array([self.output(index) for index in indices])


class HoldoutSet:
    """Held-out samples used only to report the testing error."""

    __slots__ = ("points", "phi", "outputs")

    points: np.ndarray
    phi: np.ndarray
    outputs: np.ndarray

    def __init__(
        self, points: np.ndarray, phi: np.ndarray, outputs: np.ndarray
    ) -> None:
        self.points = points
        self.phi = phi
        self.outputs = np.asarray(outputs, dtype=float)

    @classmethod
    def from_model(
        cls,
        basis: BasisSet,
        gmm: GaussianMixture,
        evaluator: Evaluator,
        size: int,
        seed: Union[int, np.random.Generator],
    ) -> "HoldoutSet":
        points = gmm.sample(size, seed)
        return cls(points, basis.evaluate(points), evaluator(points))

    @classmethod
    def from_table(
        cls, basis: BasisSet, points: np.ndarray, outputs: np.ndarray
    ) -> "HoldoutSet":
        return cls(points, basis.evaluate(points), outputs)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def error(self, coeffs: np.ndarray) -> float:
        return stats.relative_error(self.phi, coeffs, self.outputs)


@dataclasses.dataclass
class IterationRecord:
    __slots__ = (
        "outer",
        "inner",
        "samples",
        "candidate",
        "score",
        "training_error",
        "testing_error",
        "change",
    )
    outer: int
    inner: int
    samples: int
    candidate: int
    score: float
    training_error: float
    testing_error: float
    change: float


class SparseFit:
    """State of the adaptive solver: samples, support, coefficients, Gram inverse.

    ``phi1`` holds the support columns of the selected rows and ``outputs``
    their simulated values, in selection order.
    """

    selected: List[int]
    support: np.ndarray
    coeffs: np.ndarray
    graminv: np.ndarray
    phi1: np.ndarray
    outputs: np.ndarray
    history: List[IterationRecord]
    diagnostics: List[str]
    refactorizations: int
    converged: bool
    stop_reason: str

    def __init__(
        self,
        selected: Sequence[int],
        support: np.ndarray,
        coeffs: np.ndarray,
        phi1: np.ndarray,
        outputs: np.ndarray,
    ) -> None:
        self.selected = list(selected)
        self.support = np.asarray(support, dtype=np.int64)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.phi1 = phi1
        self.outputs = np.asarray(outputs, dtype=float)
        self.graminv = gram_inverse(phi1)
        self.history = []
        self.diagnostics = []
        self.refactorizations = 0
        self.converged = False
        self.stop_reason = ""

    @property
    def samples(self) -> int:
        return len(self.selected)

    @property
    def sparsity(self) -> int:
        return int(self.support.shape[0])

    def gram_drift(self) -> float:
        gram = self.phi1.T @ self.phi1
        drift = np.abs(self.graminv @ gram - np.eye(self.sparsity))
        return float(np.max(drift, initial=0.0))

    def refit(self) -> None:
        """Support coefficients ``c_1 = (Phi_1^T Phi_1)^{-1} Phi_1^T y``."""
        self.coeffs = np.zeros_like(self.coeffs)
        self.coeffs[self.support] = self.graminv @ (self.phi1.T @ self.outputs)

    def nonzero_count(self, relative: float = 1e-3) -> int:
        return stats.significant_count(self.coeffs, relative)


def gram_inverse(phi1: np.ndarray) -> np.ndarray:
    """``(Phi_1^T Phi_1)^{-1}`` by Cholesky, or a pseudo-inverse if singular."""
    gram = phi1.T @ phi1
    if gram.shape[0] == 0:
        return gram
    try:
        return cho_solve(cho_factor(gram, lower=True), np.eye(gram.shape[0]))
    except LinAlgError:
        logger.warning("Support Gram matrix is singular; using a pseudo-inverse")
        return pinvh(gram)


def sparsity_for(samples: int, s_max: int, size: int) -> int:
    """``max(5, |Xi| / 4)`` capped by ``s_max``, below ``|Xi|`` and at most ``N``."""
    target = max(MIN_SPARSITY, samples // SAMPLES_PER_TERM)
    return max(1, min(target, s_max, samples - 1, size))


def _numerical_rank(diagonal: np.ndarray, shape: Tuple[int, int]) -> int:
    magnitudes = np.abs(diagonal)
    if magnitudes.size == 0 or magnitudes[0] == 0:
        return 0
    tolerance = max(shape) * np.finfo(float).eps * magnitudes[0]
    return int(np.count_nonzero(magnitudes > tolerance))


def rrqr_select(pool: CandidatePool, count: int) -> np.ndarray:
    """The ``count`` most informative candidates by column-pivoted QR of ``Phi^T``.

    Greedy Businger-Golub pivoting stands in for a strong rank-revealing QR.
    Fewer indices come back when the numerical rank of ``Phi`` is smaller.
    """
    rows, cols = pool.phi.shape
    if not 0 < count <= min(rows, cols):
        raise types.ValidationException(
            f"Cannot select {count} samples from a {rows} x {cols} design matrix."
        )
    upper, pivots = qr(pool.phi.T, mode="r", pivoting=True)
    rank = _numerical_rank(np.diag(upper), pool.phi.shape)
    if rank < count:
        logger.warning(
            "Design matrix has numerical rank %d; selecting %d of %d requested samples",
            rank,
            rank,
            count,
        )
    return pivots[: min(count, rank)]


@dataclasses.dataclass
class CosampResult:
    __slots__ = ("coeffs", "support", "iterations", "residual", "dropped")
    coeffs: np.ndarray
    support: np.ndarray
    iterations: int
    residual: float
    dropped: int


def _top(values: np.ndarray, count: int) -> np.ndarray:
    return np.argsort(-np.abs(values), kind="stable")[:count]


def _support_lstsq(columns: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, int]:
    """Least squares on ``columns``, dropping linearly dependent ones.

    Returns the coefficients (zero for dropped columns) and how many were dropped.
    """
    result = np.zeros(columns.shape[1])
    if columns.shape[1] == 0:
        return result, 0
    _, upper, pivots = qr(columns, mode="economic", pivoting=True)
    rank = _numerical_rank(np.diag(upper), columns.shape)
    keep = np.sort(pivots[:rank])
    if rank:
        result[keep] = lstsq(columns[:, keep], y)[0]
    return result, columns.shape[1] - rank


def cosamp(
    phi_rows: np.ndarray,
    y: np.ndarray,
    sparsity: int,
    tol: float = 1e-10,
    maxit: int = 100,
) -> CosampResult:
    """Recover an ``s``-sparse ``c`` with ``Phi c ~= y`` by CoSaMP.

    Columns are normalized for the proxy and least-squares steps; the returned
    coefficients are for the original columns and solve the least-squares
    problem on the final support.

    :raises types.ValidationException: If ``s`` is not below the number of rows
    """
    rows, size = phi_rows.shape
    y = np.asarray(y, dtype=float)
    if not 0 < sparsity < rows:
        raise types.ValidationException(
            f"Sparsity {sparsity} must be positive and below the {rows} samples."
        )
    norms = np.linalg.norm(phi_rows, axis=0)
    norms[norms == 0] = 1.0
    design = phi_rows / norms
    y_norm = float(np.linalg.norm(y))
    coeffs = np.zeros(size)
    support = np.array([], dtype=np.int64)
    if y_norm == 0:
        return CosampResult(coeffs, support, 0, 0.0, 0)

    residual = y.copy()
    previous = y_norm
    dropped = 0
    iteration = 0
    for iteration in range(1, maxit + 1):
        proxy = design.T @ residual
        candidates = _top(proxy, min(2 * sparsity, size))
        merged = np.union1d(candidates, support)
        merged_coeffs, lost = _support_lstsq(design[:, merged], y)
        dropped = max(dropped, lost)
        keep = _top(merged_coeffs, sparsity)
        keep = keep[merged_coeffs[keep] != 0]
        support = np.sort(merged[keep])
        estimate = np.zeros(size)
        estimate[merged[keep]] = merged_coeffs[keep]
        residual = y - design @ estimate
        current = float(np.linalg.norm(residual))
        logger.debug("CoSaMP iteration %d: residual %g", iteration, current)
        if current <= tol * y_norm or abs(previous - current) <= tol * y_norm:
            break
        previous = current

    final, lost = _support_lstsq(design[:, support], y)
    if lost or dropped:
        logger.warning(
            "CoSaMP dropped %d linearly dependent columns", max(lost, dropped)
        )
    coeffs[support] = final / norms[support]
    residual_norm = float(np.linalg.norm(y - phi_rows @ coeffs))
    return CosampResult(coeffs, support, iteration, residual_norm, max(lost, dropped))


def d_optimal_next(fit: SparseFit, pool: CandidatePool) -> Tuple[int, float]:
    """The unused candidate maximizing ``x (Phi_1^T Phi_1)^{-1} x^T``.

    By the matrix determinant lemma this maximizes ``det(Phi_1^T Phi_1 + x^T x)``.
    Ties go to the lowest candidate index.

    :raises types.PoolExhausted: If every candidate has been selected
    """
    unused = np.setdiff1d(np.arange(pool.size), fit.selected)
    if unused.size == 0:
        raise types.PoolExhausted("Every candidate sample has already been selected.")
    rows = pool.phi[np.ix_(unused, fit.support)]
    scores = np.einsum("ij,jk,ik->i", rows, fit.graminv, rows)
    best = int(np.argmax(scores))
    return int(unused[best]), float(scores[best])


def rank_one_update(
    fit: SparseFit, row: np.ndarray, output: float, index: Optional[int] = None
) -> SparseFit:
    """Append one sample and refit the support coefficients.

    The Gram inverse is updated by Sherman-Morrison; it is recomputed from
    scratch when the denominator is tiny or the identity check drifts.
    """
    row = np.asarray(row, dtype=float)
    if row.shape != (fit.sparsity,):
        raise types.DimensionMismatch(
            f"Row of length {row.shape[0]} for a support of size {fit.sparsity}."
        )
    fit.phi1 = np.vstack([fit.phi1, row])
    fit.outputs = np.append(fit.outputs, output)
    if index is not None:
        fit.selected.append(index)
    projected = fit.graminv @ row
    denominator = 1.0 + row @ projected
    refactor = denominator <= DENOMINATOR_FLOOR
    if not refactor:
        fit.graminv = fit.graminv - np.outer(projected, projected) / denominator
        drift = fit.gram_drift()
        refactor = drift > DRIFT_TOLERANCE
        if refactor:
            logger.warning("Gram inverse drifted by %g; refactorizing", drift)
    if refactor:
        fit.graminv = gram_inverse(fit.phi1)
        fit.refactorizations += 1
    fit.refit()
    return fit


def _record(
    fit: SparseFit,
    pool: CandidatePool,
    holdout: Optional[HoldoutSet],
    outer: int,
    inner: int,
    candidate: int,
    score: float,
    change: float,
) -> IterationRecord:
    training = testing = float("nan")
    if np.any(fit.outputs):
        training = stats.relative_error(pool.phi[fit.selected], fit.coeffs, fit.outputs)
    if holdout is not None and np.any(holdout.outputs):
        testing = holdout.error(fit.coeffs)
    record = IterationRecord(
        outer, inner, fit.samples, candidate, score, training, testing, change
    )
    fit.history.append(record)
    return record


def _relative_change(current: np.ndarray, previous: np.ndarray) -> float:
    scale = float(np.linalg.norm(previous))
    delta = float(np.linalg.norm(current - previous))
    return delta / scale if scale > 0 else delta


def adaptive_fit(
    pool: CandidatePool,
    basis: BasisSet,
    options: types.SolverOptions,
    holdout: Optional[HoldoutSet] = None,
) -> SparseFit:
    """Fit sparse coefficients with adaptively chosen samples.

    The support is fixed within an outer iteration and refreshed by CoSaMP at
    the start of the next one. The procedure stops as soon as the support
    coefficients change by less than ``tol_stop`` relative to the previous
    step, when the sample budget is spent, or when the pool runs out.
    """
    size = basis.size
    if pool.phi.shape[1] != size:
        raise types.DimensionMismatch(
            f"Pool has {pool.phi.shape[1]} basis columns, the basis has {size}."
        )
    budget = options.max_samples or pool.size
    initial = min(options.r, pool.size, size, budget)
    selected = rrqr_select(pool, initial)
    outputs = pool.outputs_for(selected)
    logger.info("Selected %d initial samples by pivoted QR", len(selected))

    fit = SparseFit(
        selected,
        np.array([], dtype=np.int64),
        np.zeros(size),
        np.zeros((len(selected), 0)),
        outputs,
    )
    if len(selected) < options.r:
        fit.diagnostics.append(
            f"Initial selection returned {len(selected)} of {options.r} "
            "requested samples."
        )
    for outer in range(1, options.outer_iterations + 1):
        phi_rows = pool.phi[fit.selected]
        if size == 1:
            # Order 0: the only basis function is the constant
            support = np.flatnonzero([np.any(fit.outputs)])
            result = CosampResult(np.zeros(size), support, 0, 0.0, 0)
        else:
            result = cosamp(
                phi_rows,
                fit.outputs,
                sparsity_for(fit.samples, options.s_max, size),
                options.cosamp_tol,
                options.cosamp_maxit,
            )
        if result.dropped:
            fit.diagnostics.append(
                f"Outer iteration {outer}: dropped {result.dropped} dependent columns."
            )
        logger.info(
            "Outer iteration %d: %d samples, support of %d terms",
            outer,
            fit.samples,
            result.support.shape[0],
        )
        fit.support = result.support
        fit.phi1 = phi_rows[:, fit.support]
        fit.graminv = gram_inverse(fit.phi1)
        if fit.sparsity == 0:
            fit.coeffs = np.zeros(size)
            _record(fit, pool, holdout, outer, 0, -1, float("nan"), 0.0)
            fit.converged = True
            fit.stop_reason = "zero output"
            return fit
        fit.refit()
        _record(fit, pool, holdout, outer, 0, -1, float("nan"), float("nan"))

        for inner in range(1, options.t_max + 1):
            if fit.samples >= budget and fit.samples < pool.size:
                fit.stop_reason = "sample budget reached"
                return fit
            try:
                candidate, score = d_optimal_next(fit, pool)
            except types.PoolExhausted as exc:
                logger.warning("%s", exc)
                fit.diagnostics.append(str(exc))
                fit.stop_reason = "candidate pool exhausted"
                return fit
            previous = fit.coeffs[fit.support].copy()
            rank_one_update(
                fit,
                pool.phi[candidate, fit.support],
                pool.output(candidate),
                candidate,
            )
            change = _relative_change(fit.coeffs[fit.support], previous)
            record = _record(fit, pool, holdout, outer, inner, candidate, score, change)
            logger.debug(
                "Inner iteration %d: candidate %d, score %g, change %g, "
                "training error %g",
                inner,
                candidate,
                score,
                change,
                record.training_error,
            )
            if change < options.tol_stop:
                fit.converged = True
                fit.stop_reason = "coefficients converged"
                logger.info("Converged after %d samples", fit.samples)
                return fit
    fit.stop_reason = "outer iteration cap reached"
    return fit


def random_fit(
    pool: CandidatePool,
    basis: BasisSet,
    options: types.SolverOptions,
    budget: int,
    seed: Union[int, np.random.Generator],
    holdout: Optional[HoldoutSet] = None,
) -> SparseFit:
    """Plain compressive sensing: CoSaMP on ``budget`` random candidates."""
    if not 1 < budget <= pool.size:
        raise types.ValidationException(
            f"Budget {budget} must be between 2 and the pool size {pool.size}."
        )
    rng = util.make_rng(seed)
    selected = np.sort(rng.choice(pool.size, size=budget, replace=False))
    outputs = pool.outputs_for(selected)
    sparsity = sparsity_for(budget, options.s_max, basis.size)
    result = cosamp(
        pool.phi[selected],
        outputs,
        sparsity,
        options.cosamp_tol,
        options.cosamp_maxit,
    )
    phi1 = pool.phi[np.ix_(selected, result.support)]
    fit = SparseFit(selected, result.support, result.coeffs, phi1, outputs)
    fit.stop_reason = "random budget"
    _record(fit, pool, holdout, 1, 0, -1, float("nan"), float("nan"))
    return fit


@dataclasses.dataclass
class BudgetPoint:
    __slots__ = ("budget", "adaptive_samples", "adaptive_error", "random_error")
    budget: int
    adaptive_samples: int
    adaptive_error: float
    random_error: float


def budget_curve(
    pool: CandidatePool,
    basis: BasisSet,
    options: types.SolverOptions,
    budgets: Sequence[int],
    holdout: HoldoutSet,
    seed: Union[int, np.random.Generator],
) -> List[BudgetPoint]:
    """Held-out errors of adaptive and random sampling at equal budgets."""
    rng = util.make_rng(seed)
    points = []
    for budget in budgets:
        adaptive = adaptive_fit(
            pool, basis, dataclasses.replace(options, max_samples=budget), holdout
        )
        baseline = random_fit(pool, basis, options, budget, rng, holdout)
        points.append(
            BudgetPoint(
                budget,
                adaptive.samples,
                holdout.error(adaptive.coeffs),
                holdout.error(baseline.coeffs),
            )
        )
        logger.info(
            "Budget %d: adaptive error %g, random error %g",
            budget,
            points[-1].adaptive_error,
            points[-1].random_error,
        )
    return points
