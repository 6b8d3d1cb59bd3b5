import csv
import pathlib
import platform
from dataclasses import fields
from typing import Dict, List, Type, TypeVar, Union

import numpy as np

from mixchaos.gmm import GaussianMixture

WINDOWS = platform.system().lower() == "windows"


OptionsType = TypeVar("OptionsType")


def generate_options(option_class: Type[OptionsType], **kwargs) -> OptionsType:
    option_args = {field.name: None for field in fields(option_class)}
    option_args.update(kwargs)
    return option_class(**option_args)  # type: ignore


def random_mixture(dim: int, components: int, seed: int) -> GaussianMixture:
    """A well-conditioned mixture with random weights, means and covariances."""
    rng = np.random.Generator(np.random.Philox(seed))
    weights = rng.uniform(0.5, 1.5, components)
    weights /= weights.sum()
    means = rng.uniform(-1.0, 1.0, (components, dim))
    covariances = []
    for _ in range(components):
        factor = rng.uniform(-0.4, 0.4, (dim, dim))
        covariances.append(factor @ factor.T + np.diag(rng.uniform(0.2, 0.8, dim)))
    return GaussianMixture.from_arrays(weights, means, covariances)


def single_gaussian(mean, covariance) -> GaussianMixture:
    return GaussianMixture.from_arrays([1.0], [mean], [covariance])


def run_dir(output_dir: Union[str, pathlib.Path], command: str) -> pathlib.Path:
    """The single run directory a command wrote under ``output_dir``."""
    (found,) = pathlib.Path(output_dir).glob(f"mixchaos-{command}-*")
    return found


def read_csv(path: Union[str, pathlib.Path]) -> List[Dict[str, str]]:
    with open(path, encoding="utf8", newline="") as handle:
        return list(csv.DictReader(handle))


def read_values(path: Union[str, pathlib.Path]) -> Dict[str, float]:
    """A ``name,value`` table as a mapping."""
    return {row["name"]: float(row["value"]) for row in read_csv(path)}
