# pylint: disable=too-many-instance-attributes
import enum
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple


@dataclass
class GlobalOptions:
    __slots__ = (
        "config",
        "mixture",
        "model",
        "order",
        "seed",
        "workers",
        "output_dir",
        "verbose",
        "quiet",
        "log_timestamps",
    )
    config: Optional[str]
    mixture: Optional[str]
    model: Optional[str]
    order: Optional[int]
    seed: int
    workers: int
    output_dir: Optional[str]
    verbose: int
    quiet: bool
    log_timestamps: bool


@dataclass
class SolverOptions:
    """Knobs of the adaptive sparse solver.

    ``initial_samples`` and ``s_max`` interact: when ``initial_samples`` is
    ``None`` it defaults to ``2 * s_max``.
    """

    __slots__ = (
        "initial_samples",
        "s_max",
        "t_max",
        "tol_stop",
        "outer_iterations",
        "pool_size",
        "cosamp_tol",
        "cosamp_maxit",
        "max_samples",
    )
    initial_samples: Optional[int]
    s_max: int
    t_max: int
    tol_stop: float
    outer_iterations: int
    pool_size: int
    cosamp_tol: float
    cosamp_maxit: int
    max_samples: Optional[int]

    @property
    def r(self) -> int:
        if self.initial_samples is None:
            return 2 * self.s_max
        return self.initial_samples


def default_solver_options(**overrides) -> SolverOptions:
    values = dict(
        initial_samples=None,
        s_max=40,
        t_max=30,
        tol_stop=1e-3,
        outer_iterations=3,
        pool_size=1000,
        cosamp_tol=1e-10,
        cosamp_maxit=100,
        max_samples=None,
    )
    values.update(overrides)
    return SolverOptions(**values)  # type: ignore


@dataclass
class OutputTable:
    __slots__ = ("name", "header", "rows")
    name: str
    header: Tuple[str, ...]
    rows: List[Sequence[Any]]


@dataclass
class RunResult:
    """Everything a subcommand produced, handed to the CLI result callback.

    ``summary`` goes to ``summary.txt``; ``console_summary``, when set, is the
    styled variant echoed to the terminal.
    """

    __slots__ = (
        "command",
        "settings",
        "seeds",
        "tables",
        "summary",
        "console_summary",
        "exit_code",
    )
    command: str
    settings: Dict[str, Any]
    seeds: Dict[str, int]
    tables: List[OutputTable]
    summary: str
    console_summary: Optional[str]
    exit_code: int


class LogLevel(enum.IntEnum):
    ERROR = 0
    WARNING = 1
    INFO = 2
    DEBUG = 3


class ExitCode(enum.IntEnum):
    OK = 0
    VALIDATION = 1
    NUMERICAL = 2
    IO = 3


class MixchaosException(Exception):
    """Base class for all package exceptions"""

    exit_code = ExitCode.VALIDATION


class ConfigException(MixchaosException):
    """Raised if there is a problem with the configuration"""


class ValidationException(MixchaosException):
    """Raised if an input (mixture, index, point, table) is invalid"""


class DimensionMismatch(ValidationException):
    """Raised if two objects disagree on the parameter dimension"""


class MixtureFormatException(ValidationException):
    """Raised if a mixture file cannot be parsed"""


class TableFormatException(ValidationException):
    """Raised if a sample table cannot be parsed"""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalException(MixchaosException):
    """Raised if a computation fails for numerical reasons"""

    exit_code = ExitCode.NUMERICAL


class IllConditionedMoments(NumericalException):
    """Raised if the moment matrix cannot be factored even with jitter"""

    def __init__(self, message: str, jitter: float) -> None:
        super().__init__(message)
        self.jitter = jitter


class OracleMismatch(NumericalException):
    """Raised if computed moments disagree with a brute-force oracle"""

    def __init__(self, message: str, report: str) -> None:
        super().__init__(message)
        self.report = report


class PoolExhausted(MixchaosException):
    """Raised if no unused candidate samples remain"""
