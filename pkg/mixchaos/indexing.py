# -*- coding: utf-8 -*-
"""Multi-indices and the graded lexicographic monomial order.

Within one total degree the order is lexicographic *descending* on the
exponent vector, so for ``d=2, p=2`` the monomials come out as
``1, x1, x2, x1^2, x1*x2, x2^2``.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from mixchaos import types

EXPONENT_DTYPE = np.int16


@dataclass(frozen=True)
class MultiIndex:
    """An exponent vector ``alpha`` identifying the monomial ``xi^alpha``."""

    __slots__ = ("exponents", "_degree")
    exponents: Tuple[int, ...]

    def __post_init__(self) -> None:
        exponents = tuple(int(value) for value in self.exponents)
        if not exponents:
            raise types.ValidationException(
                "A multi-index needs at least one exponent."
            )
        if any(value < 0 for value in exponents):
            raise types.ValidationException(f"Negative exponent in {exponents}.")
        object.__setattr__(self, "exponents", exponents)
        object.__setattr__(self, "_degree", sum(exponents))

    @property
    def degree(self) -> int:
        return self._degree  # type: ignore[attr-defined]

    @classmethod
    def zero(cls, dim: int) -> "MultiIndex":
        return cls((0,) * dim)

    @classmethod
    def unit(cls, dim: int, coordinate: int) -> "MultiIndex":
        """The index of ``xi_j``; ``coordinate`` is zero-based."""
        exponents = [0] * dim
        exponents[coordinate] = 1
        return cls(tuple(exponents))

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def _check_dim(self, other: "MultiIndex") -> None:
        if other.dim != self.dim:
            raise types.DimensionMismatch(
                f"Cannot combine indices of dimension {self.dim} and {other.dim}."
            )

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        self._check_dim(other)
        return MultiIndex(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        self._check_dim(other)
        return MultiIndex(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def __str__(self) -> str:
        return format_exponents(self.exponents)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.exponents, dtype=EXPONENT_DTYPE)


def format_exponents(exponents: Iterable[int]) -> str:
    """Render an exponent vector the way it is written to CSV files."""
    return ";".join(str(int(value)) for value in exponents)


def parse_exponents(text: str) -> MultiIndex:
    try:
        return MultiIndex(tuple(int(value) for value in text.split(";")))
    except ValueError as exc:
        raise types.ValidationException(f"Malformed exponent tuple: {text!r}") from exc


def sort_key(alpha: MultiIndex) -> Tuple[int, Tuple[int, ...]]:
    """Key reproducing the canonical graded lexicographic order."""
    return alpha.degree, tuple(-value for value in alpha.exponents)


@lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> np.ndarray:
    """All exponent vectors of ``parts`` entries summing to ``total``, lex descending."""
    if parts == 1:
        block = np.array([[total]], dtype=EXPONENT_DTYPE)
        block.flags.writeable = False
        return block
    blocks = []
    for first in range(total, -1, -1):
        rest = _compositions(total - first, parts - 1)
        block = np.empty((rest.shape[0], parts), dtype=EXPONENT_DTYPE)
        block[:, 0] = first
        block[:, 1:] = rest
        blocks.append(block)
    result = np.concatenate(blocks)
    result.flags.writeable = False
    return result


def count_indices(dim: int, max_degree: int) -> int:
    """``N = (p+d)! / (p! d!)``."""
    return int(comb(max_degree + dim, dim, exact=True))


class GradedLexOrder:
    """All multi-indices of dimension ``dim`` with total degree ``<= max_degree``."""

    dim: int
    max_degree: int
    exponents: np.ndarray
    degrees: np.ndarray
    _indices: Optional[List[MultiIndex]] = None
    _parents: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __init__(self, dim: int, max_degree: int) -> None:
        if dim < 1:
            raise types.ValidationException(f"Dimension must be at least 1, got {dim}.")
        if max_degree < 0:
            raise types.ValidationException(
                f"Maximum degree must be nonnegative, got {max_degree}."
            )
        self.dim = dim
        self.max_degree = max_degree
        self.exponents = np.concatenate(
            [_compositions(degree, dim) for degree in range(max_degree + 1)]
        )
        self.exponents.flags.writeable = False
        self.degrees = self.exponents.sum(axis=1, dtype=np.int64)

    def __len__(self) -> int:
        return self.exponents.shape[0]

    @property
    def size(self) -> int:
        return len(self)

    @property
    def indices(self) -> List[MultiIndex]:
        if self._indices is None:
            self._indices = [MultiIndex(tuple(row)) for row in self.exponents.tolist()]
        return self._indices

    def degree_start(self, degree: int) -> int:
        """Position of the first index with the given total degree."""
        return count_indices(self.dim, degree - 1) if degree > 0 else 0

    def locate(self, exponents: np.ndarray) -> np.ndarray:
        """Positions of many exponent rows, computed arithmetically.

        The rank inside one degree block counts the lexicographically larger
        compositions, which is a sum of binomial coefficients per coordinate.
        """
        rows = np.atleast_2d(np.asarray(exponents, dtype=np.int64))
        if rows.shape[1] != self.dim:
            raise types.DimensionMismatch(
                f"Expected exponent rows of length {self.dim}, got {rows.shape[1]}."
            )
        if np.any(rows < 0):
            raise types.ValidationException("Negative exponents cannot be located.")
        totals = rows.sum(axis=1)
        if np.any(totals > self.max_degree):
            raise types.ValidationException(
                f"Index degree exceeds the order's maximum of {self.max_degree}."
            )
        dim = self.dim
        offsets = np.rint(comb(totals - 1 + dim, dim)).astype(np.int64)
        remaining = totals[:, np.newaxis] - (np.cumsum(rows, axis=1) - rows)
        position = offsets
        for coordinate in range(dim - 1):
            upper = (
                remaining[:, coordinate] - rows[:, coordinate] + dim - coordinate - 2
            )
            step = comb(upper, dim - coordinate - 1)
            position = position + np.rint(step).astype(np.int64)
        return position

    def position(self, alpha: MultiIndex) -> int:
        return int(self.locate(alpha.as_array())[0])

    @property
    def parents(self) -> Tuple[np.ndarray, np.ndarray]:
        """For each index ``alpha != 0``: position of ``alpha - e_j`` and ``j``.

        ``j`` is the last nonzero coordinate. Entry 0 is ``(-1, -1)``.
        """
        if self._parents is None:
            rows = self.exponents[1:].astype(np.int64)
            last = self.dim - 1 - np.argmax(rows[:, ::-1] != 0, axis=1)
            parent_rows = rows.copy()
            parent_rows[np.arange(rows.shape[0]), last] -= 1
            parent_pos = np.concatenate([[-1], self.locate(parent_rows)])
            coords = np.concatenate([[-1], last])
            self._parents = (parent_pos, coords)
        return self._parents


def enumerate_indices(dim: int, max_degree: int) -> GradedLexOrder:
    return GradedLexOrder(dim, max_degree)


def split(alpha: MultiIndex, max_degree: int) -> Tuple[MultiIndex, MultiIndex]:
    """Split ``alpha = alpha1 + alpha2`` with both degrees at most ``max_degree``.

    ``alpha1`` is filled greedily, coordinate by coordinate, up to the budget.
    """
    if not 1 < alpha.degree <= 2 * max_degree:
        raise types.ValidationException(
            f"Cannot split {alpha} of degree {alpha.degree} with p={max_degree}."
        )
    first, second = split_rows(alpha.as_array()[np.newaxis, :], max_degree)
    alpha1 = MultiIndex(tuple(first[0].tolist()))
    alpha2 = MultiIndex(tuple(second[0].tolist()))
    if alpha1.degree > max_degree or alpha2.degree > max_degree:
        raise AssertionError(f"Infeasible split of {alpha} with p={max_degree}.")
    return alpha1, alpha2


def split_rows(exponents: np.ndarray, max_degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized greedy split of many exponent rows at once."""
    rows = np.asarray(exponents, dtype=np.int64)
    before = np.cumsum(rows, axis=1) - rows
    first = np.clip(max_degree - before, 0, rows)
    return first, rows - first


def peel(alpha: MultiIndex) -> Tuple[MultiIndex, int]:
    """Remove one unit from the last nonzero coordinate: ``alpha = rest + e_j``."""
    if alpha.degree == 0:
        raise types.ValidationException("The zero index has nothing to peel.")
    coordinate = max(k for k, value in enumerate(alpha.exponents) if value)
    return alpha - MultiIndex.unit(alpha.dim, coordinate), coordinate


def monomial_vector(order: GradedLexOrder, points: Sequence[float]) -> np.ndarray:
    """Evaluate ``b(xi)`` at one point (shape ``(d,)``) or a batch (``(n, d)``).

    Each monomial is its parent monomial times one coordinate, so a batch
    costs one vector multiply per index.
    """
    values = np.asarray(points, dtype=float)
    single = values.ndim == 1
    batch = np.atleast_2d(values)
    if batch.shape[1] != order.dim:
        raise types.DimensionMismatch(
            f"Point has dimension {batch.shape[1]}, the order expects {order.dim}."
        )
    parents, coords = order.parents
    result = np.empty((batch.shape[0], order.size))
    result[:, 0] = 1.0
    for position in range(1, order.size):
        result[:, position] = result[:, parents[position]] * batch[:, coords[position]]
    return result[0] if single else result

