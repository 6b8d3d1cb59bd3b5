# -*- coding: utf-8 -*-
"""Statistics of a fitted expansion: moments, errors, and output densities."""

import csv
import logging
import math
import pathlib
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import click
import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks

from mixchaos import indexing, types, util
from mixchaos.basis import BasisSet
from mixchaos.gmm import GaussianMixture

GRID_POINTS = 512
MIN_DENSITY_SAMPLES = 10_000
EVALUATION_CHUNK = 20_000
UNDERLINE = "\u0332"

logger = logging.getLogger(__name__)


class SurrogateModel:
    """``y(xi) ~= sum_alpha c_alpha Psi_alpha(xi)``."""

    __slots__ = ("basis", "coeffs", "provenance")

    basis: BasisSet
    coeffs: np.ndarray
    provenance: Dict[str, Any]

    def __init__(
        self,
        basis: BasisSet,
        coeffs: np.ndarray,
        provenance: Optional[Dict[str, Any]] = None,
    ) -> None:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (basis.size,):
            raise types.DimensionMismatch(
                f"Got {coeffs.shape[0]} coefficients for {basis.size} basis functions."
            )
        self.basis = basis
        self.coeffs = coeffs
        self.provenance = provenance or {}

    def evaluate(self, points: np.ndarray) -> Union[float, np.ndarray]:
        values = np.asarray(points, dtype=float)
        if values.ndim == 1:
            return float(self.basis.evaluate(values) @ self.coeffs)
        result = np.empty(values.shape[0])
        for start in range(0, values.shape[0], EVALUATION_CHUNK):
            chunk = values[start : start + EVALUATION_CHUNK]
            phi = self.basis.evaluate(chunk)
            result[start : start + EVALUATION_CHUNK] = phi @ self.coeffs
        return result


def mean(model: SurrogateModel) -> float:
    return float(model.coeffs[0])


def variance(model: SurrogateModel) -> float:
    """Sum of squares of every coefficient except the constant one."""
    return float(np.sum(model.coeffs[1:] ** 2))


def standard_deviation(model: SurrogateModel) -> float:
    return math.sqrt(variance(model))


def significant_count(coeffs: np.ndarray, relative: float = 1e-3) -> int:
    """Coefficients larger than ``relative`` times the largest in magnitude."""
    peak = np.max(np.abs(coeffs), initial=0.0)
    if not peak:
        return 0
    return int(np.count_nonzero(np.abs(coeffs) > relative * peak))


def relative_error(phi_rows: np.ndarray, coeffs: np.ndarray, y: np.ndarray) -> float:
    """``||Phi c - y||_2 / ||y||_2``.

    :raises types.ValidationException: If ``y`` is zero
    """
    y = np.asarray(y, dtype=float)
    scale = float(np.linalg.norm(y))
    if scale == 0:
        raise types.ValidationException("Relative error is undefined for zero outputs.")
    return float(np.linalg.norm(phi_rows @ coeffs - y)) / scale


@dataclass
class DensityEstimate:
    """A histogram over ``[min, max]`` and a kernel density on a fixed grid."""

    __slots__ = ("edges", "counts", "grid", "density", "bandwidth", "samples", "values")
    edges: np.ndarray
    counts: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    samples: int
    values: Optional[np.ndarray]

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def silverman_bandwidth(values: np.ndarray) -> float:
    """``0.9 min(sigma, IQR / 1.34) n^(-1/5)``."""
    sigma = float(np.std(values, ddof=1)) if values.shape[0] > 1 else 0.0
    upper, lower = np.percentile(values, [75, 25])
    spread = min(sigma, (upper - lower) / 1.34) or sigma
    return 0.9 * spread * values.shape[0] ** (-0.2)


def density_from_values(
    values: np.ndarray,
    bins: int = 100,
    grid: Optional[np.ndarray] = None,
    keep_values: bool = False,
) -> DensityEstimate:
    """Histogram plus a binned Gaussian kernel density estimate.

    The kernel density is computed by smoothing a fine histogram on ``grid``
    (512 evenly spaced points by default) with a Gaussian filter. A constant
    sample yields a single histogram bin of unit width holding every value.
    """
    values = np.asarray(values, dtype=float)
    count = values.shape[0]
    low, high = float(values.min()), float(values.max())
    if high == low:
        edges = np.array([low - 0.5, low + 0.5])
        counts = np.array([count])
        if grid is None:
            grid = np.linspace(edges[0], edges[1], GRID_POINTS)
        density = np.where((grid >= edges[0]) & (grid <= edges[1]), 1.0, 0.0)
        return DensityEstimate(
            edges, counts, grid, density, 0.0, count, values if keep_values else None
        )
    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    bandwidth = silverman_bandwidth(values)
    if grid is None:
        grid = np.linspace(low - 3 * bandwidth, high + 3 * bandwidth, GRID_POINTS)
    step = float(grid[1] - grid[0])
    cell_edges = np.concatenate([grid - step / 2, [grid[-1] + step / 2]])
    cells, _ = np.histogram(values, bins=cell_edges)
    density = gaussian_filter1d(
        cells.astype(float), sigma=max(bandwidth / step, 1e-12), mode="constant"
    )
    density = density / (count * step)
    return DensityEstimate(
        edges, counts, grid, density, bandwidth, count, values if keep_values else None
    )


def density(
    model: SurrogateModel,
    gmm: GaussianMixture,
    samples: int,
    seed: Union[int, np.random.Generator],
    bins: int = 100,
    grid: Optional[np.ndarray] = None,
    keep_values: bool = False,
) -> DensityEstimate:
    """Density of the surrogate output under ``gmm``, by sampling the surrogate.

    :raises types.ValidationException: If fewer than 10^4 samples are requested
    """
    if samples < MIN_DENSITY_SAMPLES:
        raise types.ValidationException(
            f"Density estimates need at least {MIN_DENSITY_SAMPLES} samples, "
            f"got {samples}."
        )
    rng = util.make_rng(seed)
    values = np.empty(samples)
    for start in range(0, samples, EVALUATION_CHUNK):
        size = min(EVALUATION_CHUNK, samples - start)
        values[start : start + size] = model.evaluate(gmm.sample(size, rng))
    logger.info("Evaluated the surrogate at %d mixture samples", samples)
    return density_from_values(values, bins, grid, keep_values)


def density_l1_distance(first: DensityEstimate, second: DensityEstimate) -> float:
    """``int |f - g|`` after normalizing both curves, on ``first``'s grid."""
    grid = first.grid
    other = np.interp(grid, second.grid, second.density, left=0.0, right=0.0)
    left = first.density / trapezoid(first.density, grid)
    right = other / trapezoid(other, grid)
    return float(trapezoid(np.abs(left - right), grid))


def histogram_modes(
    counts: np.ndarray, min_separation: int = 5, prominence: float = 0.05
) -> np.ndarray:
    """Bin indices of the histogram's peaks.

    The counts are lightly smoothed; a peak must rise ``prominence`` times the
    highest count above its surroundings and be ``min_separation`` bins from
    any taller peak.
    """
    smoothed = gaussian_filter1d(np.asarray(counts, dtype=float), sigma=1.0)
    padded = np.concatenate([[0.0], smoothed, [0.0]])
    peaks, _ = find_peaks(
        padded, distance=max(1, min_separation), prominence=prominence * smoothed.max()
    )
    return peaks - 1


def significant_digits_agree(value: float, reference: float, limit: int = 15) -> int:
    """How many significant digits of ``reference`` ``value`` reproduces.

    ``k`` digits agree when ``|value - reference|`` is at most half a unit in
    the ``k``-th significant place of ``reference``.
    """
    if value == reference:
        return limit
    if reference == 0:
        return 0
    exponent = math.floor(math.log10(abs(reference)))
    difference = abs(value - reference)
    digits = 0
    while digits < limit and difference <= 0.5 * 10.0 ** (exponent - digits):
        digits += 1
    return digits


def _agreeing_prefix(text: str, reference: str) -> int:
    """Position of the last digit of ``text`` in the prefix it shares with ``reference``."""
    last = -1
    for position, (char, other) in enumerate(zip(text, reference)):
        if char != other:
            break
        if char.isdigit():
            last = position
    return last


def _underline(text: str, position: int, styled: bool) -> str:
    if position < 0:
        return text
    char = text[position]
    marked = click.style(char, underline=True) if styled else char + UNDERLINE
    return text[:position] + marked + text[position + 1 :]


def format_precision_table(
    reference_samples: int,
    reference_mean: float,
    monte_carlo: Sequence[Tuple[int, float]],
    decimals: int = 4,
    styled: bool = False,
) -> str:
    """Render the mean-convergence table, underlining agreeing digits.

    In each Monte Carlo mean the last digit that agrees with the surrogate
    mean is underlined, with a combining low line in plain text or terminal
    underlining when ``styled`` is set.
    """
    reference_text = f"{reference_mean:.{decimals}f}"
    header = ["method", "proposed"] + ["Monte Carlo"] + [""] * (len(monte_carlo) - 1)
    samples_row = ["# samples", str(reference_samples)]
    samples_row += [str(count) for count, _ in monte_carlo]
    plain_means = [f"{value:.{decimals}f}" for _, value in monte_carlo]
    means_row = ["mean", reference_text] + plain_means
    widths = [
        max(len(column) for column in cells)
        for cells in zip(header, samples_row, means_row)
    ]

    def render(cells: List[str], plain: List[str]) -> str:
        return " | ".join(
            cell + " " * (width - len(text))
            for cell, text, width in zip(cells, plain, widths)
        ).rstrip()

    marked = [
        _underline(text, _agreeing_prefix(text, reference_text), styled)
        for text in plain_means
    ]
    lines = [
        render(header, header),
        render(samples_row, samples_row),
        render(["mean", reference_text] + marked, means_row),
    ]
    return "\n".join(lines)


COEFFICIENT_COLUMNS = ("position", "exponents", "value")


def coefficient_rows(model: SurrogateModel) -> List[Tuple[int, str, float]]:
    exponents = model.basis.order.exponents
    return [
        (position, indexing.format_exponents(exponents[position]), float(value))
        for position, value in enumerate(model.coeffs)
    ]


def load_coefficients(
    path: Union[str, pathlib.Path], basis: BasisSet
) -> SurrogateModel:
    """Read a coefficients file written by ``fit`` and attach it to ``basis``.

    :raises types.TableFormatException: If a row is malformed or its exponents
      do not match the basis ordering
    """
    with open(path, encoding="utf8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or tuple(rows[0]) != COEFFICIENT_COLUMNS:
        raise types.TableFormatException(
            f"expected the header {','.join(COEFFICIENT_COLUMNS)}", 1
        )
    if len(rows) - 1 != basis.size:
        raise types.DimensionMismatch(
            f"{path} holds {len(rows) - 1} coefficients, the basis has {basis.size}."
        )
    coeffs = np.empty(basis.size)
    exponents = basis.order.exponents
    for position, row in enumerate(rows[1:]):
        line = position + 2
        if len(row) != len(COEFFICIENT_COLUMNS):
            raise types.TableFormatException(
                f"expected {len(COEFFICIENT_COLUMNS)} values, found {len(row)}", line
            )
        try:
            alpha = indexing.parse_exponents(row[1])
            coeffs[position] = float(row[2])
        except (types.ValidationException, ValueError) as exc:
            raise types.TableFormatException(str(exc), line) from exc
        if alpha.exponents != tuple(int(value) for value in exponents[position]):
            raise types.TableFormatException(
                f"exponents {row[1]} are out of place for a degree-{basis.max_degree} "
                f"basis in {basis.dim} parameters",
                line,
            )
    logger.info("Loaded %d coefficients from %s", basis.size, path)
    return SurrogateModel(basis, coeffs, {"coefficients": str(path)})


def density_tables(
    estimate: DensityEstimate, prefix: str = ""
) -> List[types.OutputTable]:
    """``density.csv`` (grid, density) and ``histogram.csv`` (lower, upper, count)."""
    return [
        types.OutputTable(
            f"{prefix}density.csv",
            ("grid", "density"),
            list(zip(estimate.grid, estimate.density)),
        ),
        types.OutputTable(
            f"{prefix}histogram.csv",
            ("lower", "upper", "count"),
            list(zip(estimate.edges[:-1], estimate.edges[1:], estimate.counts)),
        ),
    ]
