# -*- coding: utf-8 -*-
"""Exact Gaussian and Gaussian-mixture moments via functional tensor trains.

A component ``N(mu, A A^T)`` is written as ``xi = A eta + mu`` with ``eta``
standard normal. The monomial ``xi^alpha`` then has an exact representation

    (A eta + mu)^alpha = G_0 G_1(eta_1) ... G_d(eta_d)

where ``G_0`` is a constant row vector and ``G_i`` is a matrix whose entries
are polynomials in ``eta_i`` alone. Cores are stored coefficient-first, with
shape ``(K + 1, r_{i-1}, r_i)``, so ``core[k]`` is the matrix of coefficients
of ``eta_i**k``.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy.linalg import hankel

from mixchaos import indexing, types
from mixchaos.gmm import GaussianComponent, GaussianMixture
from mixchaos.indexing import GradedLexOrder, MultiIndex

MOMENT_CHUNK = 2048

logger = logging.getLogger(__name__)


def standard_normal_moments(max_order: int) -> np.ndarray:
    """``E[eta^k]`` for ``k = 0..max_order``: zero for odd ``k``, ``(k-1)!!`` otherwise."""
    moments = np.zeros(max(max_order, 1) + 1)
    moments[0] = 1.0
    for order in range(2, max_order + 1, 2):
        moments[order] = (order - 1) * moments[order - 2]
    return moments[: max_order + 1]


GAUSSIAN_MOMENTS = standard_normal_moments(6)
assert tuple(GAUSSIAN_MOMENTS) == (1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0)


class FttMonomial:
    """Functional tensor train of ``(A eta + mu)^alpha`` for one component."""

    __slots__ = ("lead", "cores", "target")

    lead: np.ndarray
    cores: List[np.ndarray]
    target: MultiIndex

    def __init__(
        self, lead: np.ndarray, cores: Sequence[np.ndarray], target: MultiIndex
    ) -> None:
        if len(cores) != target.dim:
            raise types.DimensionMismatch(
                f"A train for dimension {target.dim} needs {target.dim} cores, "
                f"got {len(cores)}."
            )
        self.lead = np.asarray(lead, dtype=float)
        self.cores = [np.asarray(core, dtype=float) for core in cores]
        self.target = target

    @property
    def dim(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return (self.lead.shape[0],) + tuple(core.shape[2] for core in self.cores)

    def entry(self, coordinate: int, row: int, col: int) -> Polynomial:
        """Entry ``(row, col)`` of core ``coordinate`` as a polynomial in ``eta``."""
        return Polynomial(self.cores[coordinate][:, row, col]).trim()

    def evaluate(self, eta: np.ndarray) -> np.ndarray:
        """Contract the train at one point (shape ``(d,)``) or a batch (``(n, d)``)."""
        points = np.asarray(eta, dtype=float)
        single = points.ndim == 1
        batch = np.atleast_2d(points)
        if batch.shape[1] != self.dim:
            raise types.DimensionMismatch(
                f"Point has dimension {batch.shape[1]}, the train has {self.dim}."
            )
        state = np.broadcast_to(self.lead, (batch.shape[0], self.lead.shape[0]))
        for coordinate, core in enumerate(self.cores):
            values = P.polyval(batch[:, coordinate], core)
            state = np.einsum("nr,rsn->ns", state, values)
        result = state[:, 0]
        return float(result[0]) if single else result

    def __repr__(self) -> str:
        return f"FttMonomial(target={self.target}, ranks={self.ranks})"


def constant_train(dim: int) -> FttMonomial:
    """The train of the constant 1, i.e. ``alpha = 0``."""
    return FttMonomial(
        np.ones(1), [np.ones((1, 1, 1)) for _ in range(dim)], MultiIndex.zero(dim)
    )


def first_order(coordinate: int, chol: np.ndarray, mean: np.ndarray) -> FttMonomial:
    """Rank-2 train of ``xi_j = sum_i a_ji eta_i + mu_j``; ``coordinate`` is zero-based.

    :param coordinate: The index ``j`` of the parameter
    :param chol: The lower-triangular factor ``A`` of the component covariance
    :param mean: The component mean ``mu``
    """
    dim = mean.shape[0]
    if not 0 <= coordinate < dim:
        raise types.ValidationException(
            f"Coordinate {coordinate} out of range for dimension {dim}."
        )
    cores = []
    for column in range(dim - 1):
        core = np.zeros((2, 2, 2))
        core[0] = np.eye(2)
        core[1, 1, 0] = chol[coordinate, column]
        cores.append(core)
    last = np.zeros((2, 2, 1))
    last[0, 0, 0] = 1.0
    last[1, 1, 0] = chol[coordinate, dim - 1]
    cores.append(last)
    return FttMonomial(
        np.array([mean[coordinate], 1.0]), cores, MultiIndex.unit(dim, coordinate)
    )


def _kron_core(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    rows = first.shape[1] * second.shape[1]
    cols = first.shape[2] * second.shape[2]
    result = np.zeros((first.shape[0] + second.shape[0] - 1, rows, cols))
    for power, left in enumerate(first):
        for other, right in enumerate(second):
            result[power + other] += np.kron(left, right)
    return result


def kron_combine(first: FttMonomial, second: FttMonomial) -> FttMonomial:
    """Train of the pointwise product: Kronecker products of leads and cores.

    Entries multiply as polynomials, so the expectation of the product is
    taken only after the product is formed.
    """
    if first.dim != second.dim:
        raise types.DimensionMismatch(
            f"Cannot combine trains of dimension {first.dim} and {second.dim}."
        )
    return FttMonomial(
        np.kron(first.lead, second.lead),
        [_kron_core(left, right) for left, right in zip(first.cores, second.cores)],
        first.target + second.target,
    )


def expectation(train: FttMonomial) -> float:
    """``E[G_0 G_1(eta_1) ... G_d(eta_d)]`` for independent standard-normal ``eta_i``."""
    max_power = max(core.shape[0] for core in train.cores) - 1
    moments = standard_normal_moments(max_power)
    state = train.lead
    for core in train.cores:
        state = state @ np.tensordot(moments[: core.shape[0]], core, axes=1)
    return float(state[0])


class MomentCache:
    """Memoized trains (``|alpha| <= p``) and moments of one Gaussian component."""

    component: GaussianComponent
    max_degree: int

    def __init__(self, component: GaussianComponent, max_degree: int) -> None:
        self.component = component
        self.max_degree = max_degree
        self._trains: Dict[Tuple[int, ...], FttMonomial] = {}
        self._moments: Dict[Tuple[int, ...], float] = {}
        self._lock = threading.RLock()

    def train(self, alpha: MultiIndex) -> FttMonomial:
        if alpha.degree > self.max_degree:
            raise types.ValidationException(
                f"Trains are only kept up to degree {self.max_degree}, not {alpha}."
            )
        with self._lock:
            cached = self._trains.get(alpha.exponents)
            if cached is not None:
                return cached
            if alpha.degree == 0:
                train = constant_train(alpha.dim)
            else:
                rest, coordinate = indexing.peel(alpha)
                unit = first_order(coordinate, self.component.chol, self.component.mean)
                if rest.degree == 0:
                    train = unit
                else:
                    train = kron_combine(self.train(rest), unit)
            self._trains[alpha.exponents] = train
            return train

    def moment(self, alpha: MultiIndex) -> float:
        if alpha.dim != self.component.dim:
            raise types.DimensionMismatch(
                f"Index of dimension {alpha.dim} for a component of dimension "
                f"{self.component.dim}."
            )
        if alpha.degree > 2 * self.max_degree:
            raise types.ValidationException(
                f"Moment {alpha} exceeds degree {2 * self.max_degree}."
            )
        with self._lock:
            cached = self._moments.get(alpha.exponents)
            if cached is not None:
                return cached
            if alpha.degree <= 1:
                value = expectation(self.train(alpha))
            else:
                first, second = indexing.split(alpha, self.max_degree)
                train = self.train(first)
                if second.degree:
                    train = kron_combine(train, self.train(second))
                value = expectation(train)
            self._moments[alpha.exponents] = value
            return value


def gaussian_moment(
    alpha: MultiIndex, component: GaussianComponent, cache: Optional[MomentCache] = None
) -> float:
    """``q_alpha = E[xi^alpha]`` under one Gaussian component."""
    if cache is None:
        cache = MomentCache(component, max(1, (alpha.degree + 1) // 2))
    elif cache.component is not component:
        raise types.ValidationException(
            "The moment cache belongs to another component."
        )
    return cache.moment(alpha)


def mixture_caches(gmm: GaussianMixture, max_degree: int) -> List[MomentCache]:
    return [MomentCache(component, max_degree) for component in gmm.components]


def mixture_moment(
    alpha: MultiIndex,
    gmm: GaussianMixture,
    caches: Optional[Sequence[MomentCache]] = None,
) -> float:
    """``m_alpha = sum_i w_i q_{alpha,i}``."""
    if alpha.degree == 0:
        return 1.0
    if caches is None:
        caches = mixture_caches(gmm, max(1, (alpha.degree + 1) // 2))
    return float(
        sum(
            weight * gaussian_moment(alpha, component, cache)
            for weight, component, cache in zip(gmm.weights, gmm.components, caches)
        )
    )


class MomentTable:
    """All mixture moments ``m_gamma`` with ``|gamma| <= 2p``, in graded-lex order."""

    __slots__ = ("order", "values", "basis_degree")

    order: GradedLexOrder
    values: np.ndarray
    basis_degree: int

    def __init__(
        self, order: GradedLexOrder, values: np.ndarray, basis_degree: int
    ) -> None:
        self.order = order
        self.values = values
        self.basis_degree = basis_degree

    def __len__(self) -> int:
        return self.values.shape[0]

    def value(self, alpha: MultiIndex) -> float:
        return float(self.values[self.order.position(alpha)])

    def lookup(self, exponents: np.ndarray) -> np.ndarray:
        return self.values[self.order.locate(exponents)]


def _train_stacks(
    component: GaussianComponent, order: GradedLexOrder
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Stacked trains for every ``|alpha| <= p``, grouped by degree.

    ``leads[k]`` has shape ``(n_k, 2^k)`` and ``cores[k]`` has shape
    ``(n_k, d, k + 1, 2^k, 2^k)``. The last core of every train is padded to a
    square matrix whose only nonzero column is column 0.
    """
    dim = order.dim
    chol, mean = component.chol, component.mean
    first_leads = np.stack([mean, np.ones(dim)], axis=1)
    first_cores = np.zeros((dim, dim, 2, 2, 2))
    first_cores[:, : dim - 1, 0] = np.eye(2)
    first_cores[:, dim - 1, 0, 0, 0] = 1.0
    first_cores[:, :, 1, 1, 0] = chol

    leads = [np.ones((1, 1))]
    cores = [np.ones((1, dim, 1, 1, 1))]
    if order.max_degree >= 1:
        leads.append(first_leads)
        cores.append(first_cores)
    parents, coords = order.parents
    for degree in range(2, order.max_degree + 1):
        start = order.degree_start(degree)
        stop = order.degree_start(degree + 1)
        parent = parents[start:stop] - order.degree_start(degree - 1)
        coord = coords[start:stop]
        count = stop - start
        rank = leads[-1].shape[1]
        lead = np.einsum("na,nc->nac", leads[-1][parent], first_leads[coord])
        leads.append(lead.reshape(count, 2 * rank))
        previous = cores[-1][parent]
        unit = first_cores[coord]
        stacked = np.zeros((count, dim, degree + 1, 2 * rank, 2 * rank))
        for power in range(degree):
            for other in range(2):
                stacked[:, :, power + other] += np.einsum(
                    "ndab,ndce->ndacbe", previous[:, :, power], unit[:, :, other]
                ).reshape(count, dim, 2 * rank, 2 * rank)
        cores.append(stacked)
    return leads, cores


def _contract_block(
    first: Tuple[np.ndarray, np.ndarray, np.ndarray],
    second: Tuple[np.ndarray, np.ndarray, np.ndarray],
    chunk: int,
) -> np.ndarray:
    """Expectations of ``train1 * train2`` without forming the Kronecker cores.

    Each core updates the state ``V`` (the reshaped Kronecker lead) as
    ``V <- sum_{s,t} m_{s+t} E_s^T V F_t``.
    """
    leads1, cores1, pos1 = first
    leads2, cores2, pos2 = second
    powers1, powers2 = cores1.shape[2], cores2.shape[2]
    moments = standard_normal_moments(powers1 + powers2 - 2)
    weights = hankel(moments[:powers1], moments[powers1 - 1 :])
    dim = cores1.shape[1]
    result = np.empty(pos1.shape[0])
    for start in range(0, pos1.shape[0], chunk):
        sel1 = pos1[start : start + chunk]
        sel2 = pos2[start : start + chunk]
        state = leads1[sel1][:, :, np.newaxis] * leads2[sel2][:, np.newaxis, :]
        for coordinate in range(dim):
            left = cores1[sel1, coordinate]
            right = np.einsum("st,ntab->nsab", weights, cores2[sel2, coordinate])
            updated = np.zeros_like(state)
            for power in range(powers1):
                updated += np.swapaxes(left[:, power], 1, 2) @ state @ right[:, power]
            state = updated
        result[start : start + chunk] = state[:, 0, 0]
    return result


def gaussian_moment_table(
    component: GaussianComponent, max_degree: int, chunk: int = MOMENT_CHUNK
) -> np.ndarray:
    """``q_gamma`` of one component for every ``|gamma| <= 2 * max_degree``.

    Every ``gamma`` is split with :func:`indexing.split_rows`, exactly like
    :func:`gaussian_moment`, so both paths agree to roundoff.
    """
    dim = component.dim
    train_order = GradedLexOrder(dim, max_degree)
    moment_order = GradedLexOrder(dim, 2 * max_degree)
    leads, cores = _train_stacks(component, train_order)
    values = np.empty(moment_order.size)
    for degree in range(2 * max_degree + 1):
        start = moment_order.degree_start(degree)
        stop = moment_order.degree_start(degree + 1)
        rows = moment_order.exponents[start:stop]
        first_rows, second_rows = indexing.split_rows(rows, max_degree)
        degree1 = min(degree, max_degree)
        degree2 = degree - degree1
        pos1 = train_order.locate(first_rows) - train_order.degree_start(degree1)
        pos2 = train_order.locate(second_rows) - train_order.degree_start(degree2)
        values[start:stop] = _contract_block(
            (leads[degree1], cores[degree1], pos1),
            (leads[degree2], cores[degree2], pos2),
            chunk,
        )
        logger.debug("Degree %d: %d moments", degree, stop - start)
    return values


def moment_table(
    gmm: GaussianMixture, max_degree: int, workers: int = 1
) -> MomentTable:
    """All mixture moments needed for a basis of total degree ``max_degree``.

    :param gmm: The mixture; usually already standardized
    :param max_degree: The basis degree ``p``; moments go up to ``2p``
    :param workers: Components are processed by this many threads
    """
    if max_degree < 0:
        raise types.ValidationException(
            f"Degree must be nonnegative, got {max_degree}."
        )
    order = GradedLexOrder(gmm.dim, 2 * max_degree)
    logger.info(
        "Computing %d moments (d=%d, degree <= %d) for %d components",
        order.size,
        gmm.dim,
        2 * max_degree,
        gmm.n_components,
    )
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        per_component = list(
            pool.map(
                lambda component: gaussian_moment_table(component, max_degree),
                gmm.components,
            )
        )
    values = np.zeros(order.size)
    for weight, component_values in zip(gmm.weights, per_component):
        values += weight * component_values
    values[0] = 1.0
    return MomentTable(order, values, max_degree)
