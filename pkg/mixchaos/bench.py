# -*- coding: utf-8 -*-
"""Synthetic black-box models, offline sample tables, and Monte Carlo baselines.

The bundled mixtures are synthetic. They reproduce the structure of
process-variation studies (a correlated block of parameters, several
modes, many weakly coupled independent parameters) without modeling any
device physics.
"""

import csv
import logging
import pathlib
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from mixchaos import stats, types, util
from mixchaos.basis import BasisSet, build_basis
from mixchaos.gmm import GaussianComponent, GaussianMixture, load_mixture

PLANTED_PATTERN = re.compile(r"^poly-planted-(\d+)d$")
PLANTED_SPARSITY = 10
MAX_PLANTED_DIM = 60
MC_CHUNK = 100_000

logger = logging.getLogger(__name__)


class BlackBoxModel:
    """A deterministic scalar performance ``y(xi)`` with its recommended mixture."""

    name: str
    dim: int
    mixture: GaussianMixture
    order: int
    description: str

    def __init__(
        self,
        name: str,
        mixture: GaussianMixture,
        evaluator: Callable[[np.ndarray], np.ndarray],
        order: int,
        description: str,
    ) -> None:
        self.name = name
        self.dim = mixture.dim
        self.mixture = mixture
        self.order = order
        self.description = description
        self._evaluator = evaluator

    def evaluate(self, points: np.ndarray) -> Union[float, np.ndarray]:
        """Evaluate at one point (shape ``(d,)``) or each row of a batch."""
        values = np.asarray(points, dtype=float)
        single = values.ndim == 1
        batch = np.atleast_2d(values)
        if batch.shape[1] != self.dim:
            raise types.DimensionMismatch(
                f"Model {self.name} takes {self.dim} parameters, got {batch.shape[1]}."
            )
        result = np.asarray(self._evaluator(batch), dtype=float)
        return float(result[0]) if single else result

    def __repr__(self) -> str:
        return f"BlackBoxModel({self.name!r}, d={self.dim})"


class PlantedModel(BlackBoxModel):
    """An exactly sparse expansion in the basis built from its own mixture.

    The basis is built on first use, so resolving the model is cheap.
    """

    sparsity: int

    def __init__(
        self, name: str, mixture: GaussianMixture, order: int, sparsity: int
    ) -> None:
        super().__init__(
            name,
            mixture,
            self._planted_values,
            order,
            f"{sparsity}-sparse polynomial in the degree-{order} basis of its mixture",
        )
        self.sparsity = sparsity
        self._basis: Optional[BasisSet] = None
        self._coeffs: Optional[np.ndarray] = None

    @property
    def basis(self) -> BasisSet:
        if self._basis is None:
            self._basis = build_basis(self.mixture, self.order)
        return self._basis

    @property
    def coeffs(self) -> np.ndarray:
        """The planted coefficient vector; entry 0 is always nonzero."""
        if self._coeffs is None:
            size = self.basis.size
            rng = util.make_rng(util.derive_seed(0, self.name))
            count = min(self.sparsity, size)
            positions = np.concatenate(
                [[0], rng.choice(np.arange(1, size), size=count - 1, replace=False)]
            )
            values = rng.uniform(0.5, 2.0, count) * rng.choice([-1.0, 1.0], count)
            values[0] = 3.0
            coeffs = np.zeros(size)
            coeffs[positions] = values
            self._coeffs = coeffs
        return self._coeffs

    def _planted_values(self, points: np.ndarray) -> np.ndarray:
        return self.basis.evaluate(points) @ self.coeffs


def _ar_covariance(scales: Sequence[float], rho: float) -> np.ndarray:
    """``diag(s) R diag(s)`` with ``R_ij = rho^|i-j|``."""
    scales = np.asarray(scales, dtype=float)
    positions = np.arange(scales.shape[0])
    lags = np.abs(np.subtract.outer(positions, positions))
    return np.outer(scales, scales) * rho ** lags


def _block_mixture(
    weights: Sequence[float],
    block_means: Sequence[Sequence[float]],
    block_scales: Sequence[float],
    block_rhos: Sequence[float],
    free_scales: Sequence[float],
) -> GaussianMixture:
    """Components share independent coordinates and differ in a correlated block."""
    block = len(block_scales)
    dim = block + len(free_scales)
    components = []
    for means, rho in zip(block_means, block_rhos):
        mean = np.zeros(dim)
        mean[:block] = means
        covariance = np.zeros((dim, dim))
        covariance[:block, :block] = _ar_covariance(block_scales, rho)
        covariance[block:, block:] = np.diag(np.asarray(free_scales, dtype=float) ** 2)
        components.append(GaussianComponent(mean, covariance))
    return GaussianMixture(weights, components)


def _planted_mixture(dim: int) -> GaussianMixture:
    direction = np.zeros(dim)
    direction[0] = 0.8
    if dim > 1:
        direction[1] = 0.4
    return GaussianMixture(
        [0.4, 0.6],
        [
            GaussianComponent(direction, _ar_covariance([0.7] * dim, 0.4)),
            GaussianComponent(-direction, _ar_covariance([0.6] * dim, -0.3)),
        ],
    )


def planted_order(dim: int) -> int:
    if dim <= 6:
        return 4
    if dim <= 12:
        return 3
    return 2


def planted_model(dim: int) -> PlantedModel:
    if not 1 <= dim <= MAX_PLANTED_DIM:
        raise types.ValidationException(
            f"Planted models exist for 1 <= d <= {MAX_PLANTED_DIM}, got {dim}."
        )
    return PlantedModel(
        f"poly-planted-{dim}d",
        _planted_mixture(dim),
        planted_order(dim),
        PLANTED_SPARSITY,
    )


def _filter19_mixture() -> GaussianMixture:
    free = [0.2 + 0.05 * (k % 5) for k in range(15)]
    return _block_mixture(
        weights=[0.3, 0.4, 0.3],
        block_means=[
            [-2.4, 0.2, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [2.4, -0.2, 0.0, 0.0],
        ],
        block_scales=[0.7, 0.5, 0.6, 0.4],
        block_rhos=[0.5, -0.3, 0.4],
        free_scales=free,
    )


def _filter19(x: np.ndarray) -> np.ndarray:
    return (
        20.0
        + 0.9 * x[:, 0]
        + 0.35 * x[:, 1]
        - 0.25 * x[:, 2]
        + 0.15 * x[:, 3]
        + 0.06 * x[:, 0] * x[:, 1]
        - 0.05 * x[:, 0] ** 2
        + 0.08 * x[:, 1] * x[:, 2]
        + 0.3 / (1.0 + 0.1 * (x[:, 0] - 0.5 * x[:, 2]) ** 2)
        + 0.08 * x[:, 5]
        - 0.06 * x[:, 8]
        + 0.04 * x[:, 11] * x[:, 12]
        + 0.03 * x[:, 16] ** 2
    )


def _osc57_mixture() -> GaussianMixture:
    return _block_mixture(
        weights=[0.5, 0.5],
        block_means=[[-1.5, 0.3, 0.0], [1.5, -0.3, 0.0]],
        block_scales=[0.5, 0.6, 0.7],
        block_rhos=[0.6, -0.4],
        free_scales=[0.3] * 54,
    )


def _osc57(x: np.ndarray) -> np.ndarray:
    weak = 0.03 * np.sum(x[:, 3:12], axis=1) + 0.01 * np.sum(x[:, 12:16] ** 2, axis=1)
    return (
        90.5
        - 1.8 * x[:, 0]
        + 0.6 * x[:, 1]
        - 0.4 * x[:, 0] * x[:, 1]
        + 0.2 * x[:, 2] ** 2
        + weak
        + 0.05 * np.tanh(x[:, 4])
    )


def _tiny2_mixture() -> GaussianMixture:
    return GaussianMixture.from_arrays(
        [0.35, 0.65],
        [[-1.0, 0.5], [1.0, -0.5]],
        [[[0.5, 0.2], [0.2, 0.4]], [[0.3, -0.1], [-0.1, 0.6]]],
    )


def _tiny2(x: np.ndarray) -> np.ndarray:
    return 1.0 + 0.8 * x[:, 0] - 0.5 * x[:, 1] + 0.3 * x[:, 0] * x[:, 1]


def _tiny3_mixture() -> GaussianMixture:
    return GaussianMixture.from_arrays(
        [0.2, 0.5, 0.3],
        [[-1.0, 0.0, 0.5], [0.5, 0.5, 0.0], [1.5, -0.5, -0.5]],
        [
            [[0.4, 0.1, 0.0], [0.1, 0.3, 0.05], [0.0, 0.05, 0.2]],
            [[0.3, -0.1, 0.05], [-0.1, 0.5, 0.0], [0.05, 0.0, 0.4]],
            [[0.2, 0.0, 0.0], [0.0, 0.2, 0.1], [0.0, 0.1, 0.3]],
        ],
    )


def _tiny3(x: np.ndarray) -> np.ndarray:
    return np.exp(0.3 * x[:, 0]) + x[:, 1] * x[:, 2] + 0.5 * x[:, 2]


_BUILDERS: Dict[str, Callable[[], BlackBoxModel]] = {
    "tiny2": lambda: BlackBoxModel(
        "tiny2", _tiny2_mixture(), _tiny2, 2, "bilinear response of two parameters"
    ),
    "tiny3": lambda: BlackBoxModel(
        "tiny3", _tiny3_mixture(), _tiny3, 3, "smooth response of three parameters"
    ),
    "filter19": lambda: BlackBoxModel(
        "filter19",
        _filter19_mixture(),
        _filter19,
        3,
        "peaked rational response of 19 parameters, multimodal output",
    ),
    "osc57": lambda: BlackBoxModel(
        "osc57",
        _osc57_mixture(),
        _osc57,
        2,
        "weakly nonlinear response of 57 parameters",
    ),
}


def builtin_models() -> List[BlackBoxModel]:
    return [build() for build in _BUILDERS.values()] + [planted_model(6)]


def get_model(name: str) -> BlackBoxModel:
    """Resolve a builtin model name, including the ``poly-planted-<d>d`` family.

    :raises types.ValidationException: If no model has that name
    """
    if name in _BUILDERS:
        return _BUILDERS[name]()
    match = PLANTED_PATTERN.match(name)
    if match:
        return planted_model(int(match.group(1)))
    known = ", ".join(list(_BUILDERS) + ["poly-planted-<d>d"])
    raise types.ValidationException(f"Unknown model {name!r}; choose one of {known}.")


def resolve_mixture(
    spec: Optional[str], model: Optional[BlackBoxModel] = None
) -> GaussianMixture:
    """A mixture from a file path, a builtin model name, or the model's own mixture."""
    if spec is None:
        if model is None:
            raise types.ValidationException("No mixture or model was given.")
        return model.mixture
    path = pathlib.Path(spec)
    if path.is_file():
        return load_mixture(path)
    try:
        return get_model(spec).mixture
    except types.ValidationException as exc:
        raise types.ValidationException(
            f"{spec!r} is neither a mixture file nor a builtin model."
        ) from exc


@dataclass
class Setup:
    __slots__ = ("model", "mixture", "order")
    model: Optional[BlackBoxModel]
    mixture: GaussianMixture
    order: int


def resolve_setup(
    mixture: Optional[str], model_name: Optional[str], order: Optional[int]
) -> Setup:
    """Resolve the global ``--mixture``/``--model``/``--order`` options.

    :raises types.DimensionMismatch: If the model and the mixture disagree on ``d``
    :raises types.ValidationException: If no degree is given and there is no
      model to recommend one
    """
    model = get_model(model_name) if model_name else None
    gmm = resolve_mixture(mixture, model)
    if model is not None and model.dim != gmm.dim:
        raise types.DimensionMismatch(
            f"Model {model.name} takes {model.dim} parameters, "
            f"the mixture has {gmm.dim}."
        )
    if order is None:
        if model is None:
            raise types.ValidationException(
                "No --order given and no --model to default it from."
            )
        order = model.order
    return Setup(model, gmm, order)


@dataclass
class McBaseline:
    __slots__ = (
        "samples",
        "mean",
        "variance",
        "mean_error",
        "variance_error",
        "density",
    )
    samples: int
    mean: float
    variance: float
    mean_error: float
    variance_error: float
    density: stats.DensityEstimate


def sample_outputs(
    model: BlackBoxModel,
    gmm: GaussianMixture,
    count: int,
    seed: Union[int, np.random.Generator],
) -> np.ndarray:
    """Evaluate the model at ``count`` mixture samples, drawn in chunks from one stream."""
    rng = util.make_rng(seed)
    values = np.empty(count)
    for start in range(0, count, MC_CHUNK):
        size = min(MC_CHUNK, count - start)
        values[start : start + size] = model.evaluate(gmm.sample(size, rng))
    return values


def mc_baseline(
    model: BlackBoxModel,
    gmm: GaussianMixture,
    count: int,
    seed: Union[int, np.random.Generator],
    bins: int = 100,
    grid: Optional[np.ndarray] = None,
) -> McBaseline:
    """Mean, variance and output density by direct sampling, with standard errors."""
    if count < 2:
        raise types.ValidationException(
            f"Monte Carlo needs at least 2 samples, got {count}."
        )
    values = sample_outputs(model, gmm, count, seed)
    center = float(values.mean())
    spread = float(values.var(ddof=1))
    fourth = float(np.mean((values - center) ** 4))
    variance_error = float(np.sqrt(max(fourth - spread ** 2, 0.0) / count))
    logger.info("Monte Carlo with %d samples: mean %r", count, center)
    return McBaseline(
        count,
        center,
        spread,
        float(np.sqrt(spread / count)),
        variance_error,
        stats.density_from_values(values, bins, grid),
    )


class SampleTable:
    """Parameter samples and outputs, for offline fitting."""

    __slots__ = ("points", "outputs", "model", "seed")

    points: np.ndarray
    outputs: np.ndarray
    model: str
    seed: int

    def __init__(
        self, points: np.ndarray, outputs: np.ndarray, model: str, seed: int
    ) -> None:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        outputs = np.asarray(outputs, dtype=float)
        if outputs.shape != (points.shape[0],):
            raise types.ValidationException(
                f"{points.shape[0]} sample rows but {outputs.shape[0]} outputs."
            )
        self.points = points
        self.outputs = outputs
        self.model = model
        self.seed = seed

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(f"xi{k}" for k in range(1, self.dim + 1)) + ("y",)

    def duplicates(self) -> int:
        return self.size - np.unique(self.points, axis=0).shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleTable):
            return NotImplemented
        return (
            self.model == other.model
            and self.seed == other.seed
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.outputs, other.outputs)
        )


def generate_table(
    model: BlackBoxModel,
    gmm: GaussianMixture,
    count: int,
    seed: int,
) -> SampleTable:
    points = gmm.sample(count, seed)
    return SampleTable(points, model.evaluate(points), model.name, seed)


def save_table(table: SampleTable, path: Union[str, pathlib.Path]) -> None:
    with open(path, "w", encoding="utf8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model", table.model])
        writer.writerow(["d", table.dim])
        writer.writerow(["seed", table.seed])
        writer.writerow(table.columns)
        for point, output in zip(table.points, table.outputs):
            writer.writerow(
                [util.format_value(value) for value in point]
                + [util.format_value(output)]
            )


def _header_field(rows: List[List[str]], line: int, name: str) -> str:
    if len(rows) < line or len(rows[line - 1]) != 2 or rows[line - 1][0] != name:
        raise types.TableFormatException(f"expected header field '{name}'", line)
    return rows[line - 1][1]


def load_table(path: Union[str, pathlib.Path]) -> SampleTable:
    """Read a sample table.

    :raises types.TableFormatException: If the header or a row is malformed;
      the message carries the line number
    """
    with open(path, encoding="utf8", newline="") as handle:
        rows = list(csv.reader(handle))
    model = _header_field(rows, 1, "model")
    try:
        dim = int(_header_field(rows, 2, "d"))
        seed = int(_header_field(rows, 3, "seed"))
    except ValueError as exc:
        raise types.TableFormatException(f"malformed header value: {exc}") from exc
    columns = tuple(f"xi{k}" for k in range(1, dim + 1)) + ("y",)
    if len(rows) < 4 or tuple(rows[3]) != columns:
        raise types.TableFormatException(
            f"column names do not match field 'd' = {dim}", 4
        )
    values = np.empty((len(rows) - 4, dim + 1))
    for offset, row in enumerate(rows[4:]):
        line = offset + 5
        if len(row) != dim + 1:
            raise types.TableFormatException(
                f"expected {dim + 1} values, found {len(row)}", line
            )
        try:
            values[offset] = [float(value) for value in row]
        except ValueError as exc:
            raise types.TableFormatException(str(exc), line) from exc
    table = SampleTable(values[:, :dim], values[:, dim], model, seed)
    if table.size and table.duplicates():
        logger.warning(
            "Sample table %s has %d duplicated rows", path, table.duplicates()
        )
    return table
