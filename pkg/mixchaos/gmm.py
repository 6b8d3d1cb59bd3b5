# -*- coding: utf-8 -*-
"""Gaussian-mixture joint densities of the correlated parameters."""

import logging
import pathlib
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import tomlkit
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.special import logsumexp

from mixchaos import types, util

SYMMETRY_TOLERANCE = 1e-12
WEIGHT_TOLERANCE = 1e-12

logger = logging.getLogger(__name__)


class GaussianComponent:
    """One multivariate normal ``N(mu, Sigma)`` with its Cholesky factor ``A``."""

    __slots__ = ("mean", "covariance", "chol", "log_det")

    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray
    log_det: float

    def __init__(
        self, mean: Sequence[float], covariance: Sequence[Sequence[float]]
    ) -> None:
        """
        :param mean: The mean vector of length ``d``
        :param covariance: A ``d`` x ``d`` symmetric positive definite matrix
        :raises types.ValidationException: If the covariance is not symmetric
          positive definite, or the shapes disagree
        """
        mean_arr = np.array(mean, dtype=float)
        cov_arr = np.array(covariance, dtype=float)
        if mean_arr.ndim != 1:
            raise types.ValidationException("A component mean must be a vector.")
        dim = mean_arr.shape[0]
        if cov_arr.shape != (dim, dim):
            raise types.DimensionMismatch(
                f"Covariance of shape {cov_arr.shape} does not match mean of "
                f"length {dim}."
            )
        if not (np.all(np.isfinite(mean_arr)) and np.all(np.isfinite(cov_arr))):
            raise types.ValidationException("Component parameters must be finite.")
        scale = np.max(np.abs(cov_arr))
        if np.max(np.abs(cov_arr - cov_arr.T)) > SYMMETRY_TOLERANCE * scale:
            raise types.ValidationException("Covariance matrix is not symmetric.")
        cov_arr = 0.5 * (cov_arr + cov_arr.T)
        try:
            chol = cholesky(cov_arr, lower=True)
        except LinAlgError as exc:
            raise types.ValidationException(
                "Covariance matrix is not positive definite."
            ) from exc
        if not np.all(np.diag(chol) > 0):
            raise types.ValidationException(
                "Covariance matrix is not positive definite."
            )
        for array in (mean_arr, cov_arr, chol):
            array.flags.writeable = False
        self.mean = mean_arr
        self.covariance = cov_arr
        self.chol = chol
        self.log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_density(self, points: np.ndarray) -> np.ndarray:
        """Log of the normal density at each row of ``points`` (shape ``(n, d)``)."""
        centered = np.atleast_2d(points) - self.mean
        whitened = solve_triangular(self.chol, centered.T, lower=True)
        quad = np.sum(whitened ** 2, axis=0)
        return -0.5 * (self.dim * np.log(2.0 * np.pi) + self.log_det + quad)

    def __repr__(self) -> str:
        return (
            f"GaussianComponent(mean={self.mean.tolist()}, "
            f"covariance={self.covariance.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``xi -> (xi - shift) / scale``, coordinate-wise."""

    __slots__ = ("shift", "scale")
    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.zeros(dim), np.ones(dim))

    def forward(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.shift) / self.scale

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return self.shift + self.scale * np.asarray(points, dtype=float)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return bool(
            np.all(np.abs(self.shift) <= tol)
            and np.all(np.abs(self.scale - 1.0) <= tol)
        )


class GaussianMixture:
    """The joint density ``rho(xi) = sum_i w_i N(xi | mu_i, Sigma_i)``."""

    __slots__ = ("weights", "components")

    weights: np.ndarray
    components: Tuple[GaussianComponent, ...]

    def __init__(
        self, weights: Sequence[float], components: Sequence[GaussianComponent]
    ) -> None:
        weights_arr = np.array(weights, dtype=float)
        if weights_arr.ndim != 1 or weights_arr.shape[0] == 0:
            raise types.ValidationException(
                "Mixture weights must be a non-empty vector."
            )
        if weights_arr.shape[0] != len(components):
            raise types.ValidationException(
                f"Got {weights_arr.shape[0]} weights for {len(components)} components."
            )
        if not np.all(weights_arr > 0):
            raise types.ValidationException(
                "Mixture weights must be strictly positive."
            )
        if abs(weights_arr.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise types.ValidationException(
                f"Mixture weights sum to {weights_arr.sum()!r}, not 1."
            )
        dims = {component.dim for component in components}
        if len(dims) != 1:
            raise types.DimensionMismatch(
                f"Mixture components have different dimensions: {sorted(dims)}."
            )
        weights_arr.flags.writeable = False
        self.weights = weights_arr
        self.components = tuple(components)

    @classmethod
    def from_arrays(
        cls,
        weights: Sequence[float],
        means: Sequence[Sequence[float]],
        covariances: Sequence[Sequence[Sequence[float]]],
    ) -> "GaussianMixture":
        means_arr = np.asarray(means, dtype=float)
        covs_arr = np.asarray(covariances, dtype=float)
        if means_arr.ndim != 2 or covs_arr.ndim != 3:
            raise types.ValidationException(
                "Means must be n x d and covariances n x d x d."
            )
        if means_arr.shape[0] != covs_arr.shape[0]:
            raise types.ValidationException(
                f"Got {means_arr.shape[0]} means and {covs_arr.shape[0]} covariances."
            )
        return cls(
            weights,
            [GaussianComponent(mean, cov) for mean, cov in zip(means_arr, covs_arr)],
        )

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.stack([component.mean for component in self.components])

    @property
    def covariances(self) -> np.ndarray:
        return np.stack([component.covariance for component in self.components])

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        """``sum_i w_i (Sigma_i + mu_i mu_i^T) - m m^T``."""
        means = self.means
        second = np.einsum("i,ijk->jk", self.weights, self.covariances)
        second += np.einsum("i,ij,ik->jk", self.weights, means, means)
        center = self.mean()
        return second - np.outer(center, center)

    def _check_points(self, points: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        batch = np.atleast_2d(np.asarray(points, dtype=float))
        if batch.shape[1] != self.dim:
            raise types.DimensionMismatch(
                f"Point has dimension {batch.shape[1]}, the mixture has {self.dim}."
            )
        return batch

    def log_density(
        self, points: Union[Sequence[float], np.ndarray]
    ) -> Union[float, np.ndarray]:
        single = np.ndim(points) == 1
        batch = self._check_points(points)
        terms = np.stack(
            [component.log_density(batch) for component in self.components]
        )
        result = logsumexp(terms, axis=0, b=self.weights[:, np.newaxis])
        return float(result[0]) if single else result

    def density(
        self, points: Union[Sequence[float], np.ndarray]
    ) -> Union[float, np.ndarray]:
        """Evaluate ``rho`` at one point or at each row of a batch."""
        return np.exp(self.log_density(points))

    def sample(self, count: int, seed: Union[int, np.random.Generator]) -> np.ndarray:
        """Draw ``count`` points; component ``i`` is picked with probability ``w_i``.

        :param count: How many points to draw
        :param seed: A seed for a Philox generator, or an explicit generator
        """
        if count < 1:
            raise types.ValidationException(
                f"Sample count must be positive, got {count}."
            )
        rng = util.make_rng(seed)
        uniform = rng.random(count)
        normal = rng.standard_normal((count, self.dim))
        cumulative = np.cumsum(self.weights)
        labels = np.minimum(
            np.searchsorted(cumulative, uniform, side="right"), self.n_components - 1
        )
        result = np.empty((count, self.dim))
        for label, component in enumerate(self.components):
            mask = labels == label
            result[mask] = component.mean + normal[mask] @ component.chol.T
        return result

    def standardize(self) -> Tuple[AffineMap, "GaussianMixture"]:
        """Map to zero mixture mean and unit per-coordinate variance.

        :raises types.ValidationException: If a coordinate has zero variance
        """
        center = self.mean()
        variances = np.diag(self.covariance())
        for coordinate, variance in enumerate(variances):
            if not variance > 0:
                raise types.ValidationException(
                    f"Coordinate {coordinate + 1} has zero mixture variance."
                )
        scale = np.sqrt(variances)
        affine = AffineMap(center, scale)
        mapped = GaussianMixture(
            self.weights,
            [
                GaussianComponent(
                    affine.forward(component.mean),
                    component.covariance / np.outer(scale, scale),
                )
                for component in self.components
            ],
        )
        logger.debug("Standardized mixture with shift %s and scale %s", center, scale)
        return affine, mapped

    def __repr__(self) -> str:
        return f"GaussianMixture(n={self.n_components}, d={self.dim})"


MIXTURE_FIELDS = ("d", "n", "weights", "means", "covariances")


def _field(data: Any, name: str) -> Any:
    try:
        return data[name]
    except KeyError as exc:
        raise types.MixtureFormatException(f"Missing field '{name}'.") from exc


def _numeric(data: Any, name: str, convert: Callable[[Any], Any]) -> Any:
    value = _field(data, name)
    try:
        return convert(value)
    except (TypeError, ValueError) as exc:
        raise types.MixtureFormatException(
            f"Field '{name}' is not numeric: {value!r}."
        ) from exc


def _float_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


def mixture_from_mapping(data: Any) -> GaussianMixture:
    """Build a mixture from the parsed contents of a mixture file."""
    dim = _numeric(data, "d", int)
    count = _numeric(data, "n", int)
    weights = _numeric(data, "weights", _float_array)
    means = _numeric(data, "means", _float_array)
    covariances = _numeric(data, "covariances", _float_array)
    if weights.shape != (count,):
        raise types.MixtureFormatException(
            f"Field 'weights' has shape {weights.shape}, expected ({count},)."
        )
    if means.shape != (count, dim):
        raise types.MixtureFormatException(
            f"Field 'means' has shape {means.shape}, expected ({count}, {dim})."
        )
    if covariances.shape == (count, dim * dim):
        covariances = covariances.reshape(count, dim, dim)
    if covariances.shape != (count, dim, dim):
        raise types.MixtureFormatException(
            f"Field 'covariances' has shape {covariances.shape}, "
            f"expected ({count}, {dim}, {dim})."
        )
    return GaussianMixture.from_arrays(weights, means, covariances)


def load_mixture(path: Union[str, pathlib.Path]) -> GaussianMixture:
    """Read a mixture specification file (TOML).

    :raises types.MixtureFormatException: If the file is not valid TOML or a
      field is missing or malformed
    :raises OSError: If the file cannot be read
    """
    text = pathlib.Path(path).read_text(encoding="utf8")
    try:
        data = tomlkit.loads(text)
    except tomlkit.exceptions.ParseError as exc:
        raise types.MixtureFormatException(
            f"Error reading mixture file {path}: {exc}"
        ) from exc
    logger.info("Loaded mixture file %s", path)
    return mixture_from_mapping(data)


def mixture_document(
    gmm: GaussianMixture, name: Optional[str] = None, description: Optional[str] = None
) -> tomlkit.toml_document.TOMLDocument:
    doc = tomlkit.document()
    if name:
        doc.add("name", name)
    if description:
        doc.add("description", description)
    doc.add("d", gmm.dim)
    doc.add("n", gmm.n_components)
    doc.add("weights", [float(value) for value in gmm.weights])
    doc.add("means", _nested(gmm.means))
    doc.add("covariances", _nested(gmm.covariances))
    return doc


def _nested(array: np.ndarray) -> List[Any]:
    return array.astype(float).tolist()


def save_mixture(
    gmm: GaussianMixture,
    path: Union[str, pathlib.Path],
    name: Optional[str] = None,
    description: Optional[str] = None,
) -> None:
    pathlib.Path(path).write_text(
        tomlkit.dumps(mixture_document(gmm, name, description)), encoding="utf8"
    )
