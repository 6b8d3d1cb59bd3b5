# -*- coding: utf-8 -*-
import csv
import pathlib
from functools import lru_cache, partial
from hashlib import blake2s
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import click
import numpy as np
import tomlkit

from mixchaos import types

SEED_BITS = 63
# Options that change how a run is reported, never what it computes
PRESENTATION_OPTIONS = ("config", "output_dir", "verbose", "quiet", "log_timestamps")


style_ok = partial(click.style, fg="bright_green")  # pylint: disable=invalid-name
style_error = partial(click.style, fg="red", bold=True)  # pylint: disable=invalid-name
style_warning = partial(click.style, fg="bright_yellow")  # pylint: disable=invalid-name


def fail(msg: str, ctx: click.Context, code: int = 1) -> None:
    """Print out a styled error message and exit.

    :param msg: The message to print out to the user
    :param ctx: A context from a currently executing Click command
    :param code: The exit code to use; must be >= 1
    """
    click.echo(style_error(msg), err=True)
    ctx.exit(code)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception raised by the library onto the documented exit code."""
    if isinstance(exc, types.MixchaosException):
        return int(exc.exit_code)
    if isinstance(exc, OSError):
        return int(types.ExitCode.IO)
    return int(types.ExitCode.VALIDATION)


@lru_cache(maxsize=None)
def derive_seed(master: int, purpose: str) -> int:
    """Derive a stable, independent seed for one use of randomness.

    :param master: The master seed of the run
    :param purpose: What the stream is for, e.g. ``pool`` or ``holdout``
    """
    digest = blake2s("{}$${}".format(master, purpose).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << SEED_BITS) - 1)


def make_rng(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    """A Philox generator for ``seed``; generators are passed through untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


def package_version() -> str:
    try:
        from importlib.metadata import PackageNotFoundError, version
    except ImportError:  # pragma: no cover
        return "unknown"
    try:
        return version("mixchaos")
    except PackageNotFoundError:
        return "unknown"


def format_value(value: Any) -> str:
    """Render one CSV cell. Floats use ``repr`` so they read back exactly."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(
    path: pathlib.Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    with open(path, "w", encoding="utf8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])


def _toml_value(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, (list, tuple)):
        return [_toml_value(item) for item in value]
    return str(value)


def _toml_table(values: Mapping[str, Any]) -> tomlkit.items.Table:
    table = tomlkit.table()
    for key in sorted(values):
        if values[key] is not None:
            table.add(key.replace("_", "-"), _toml_value(values[key]))
    return table


def config_document(
    options: types.GlobalOptions, result: types.RunResult
) -> tomlkit.toml_document.TOMLDocument:
    """Serialize everything that determines a run's outputs.

    The document is itself a valid configuration file: passing it back
    through ``--config`` and invoking the same subcommand reruns the job.
    """
    global_values = {
        name: getattr(options, name)
        for name in options.__slots__
        if name not in PRESENTATION_OPTIONS
    }
    tool_table = _toml_table(global_values)
    tool_table.add(result.command, _toml_table(result.settings))
    tool = tomlkit.table()
    tool.add("mixchaos", tool_table)

    provenance = tomlkit.table()
    provenance.add("command", result.command)
    provenance.add("version", package_version())
    provenance.add("seeds", _toml_table(result.seeds))

    doc = tomlkit.document()
    doc.add("tool", tool)
    doc.add("provenance", provenance)
    return doc


def run_digest(document: tomlkit.toml_document.TOMLDocument) -> str:
    return blake2s(tomlkit.dumps(document).encode("utf-8"), digest_size=8).hexdigest()


def write_outputs(
    result: types.RunResult, document: tomlkit.toml_document.TOMLDocument, output_dir: pathlib.Path
) -> List[str]:
    """Write the config, every table, and the summary of a run.

    :param result: The finished run
    :param document: The serialized configuration of the run
    :param output_dir: The directory where the files should be written
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    config_file = output_dir / "config.toml"
    config_file.write_text(tomlkit.dumps(document), encoding="utf8")
    written.append(str(config_file))
    for table in result.tables:
        table_file = output_dir / table.name
        write_csv(table_file, table.header, table.rows)
        written.append(str(table_file))
    summary_file = output_dir / "summary.txt"
    summary_file.write_text(result.summary + "\n", encoding="utf8")
    written.append(str(summary_file))
    return written


def echo_result(
    options: types.GlobalOptions,
    result: types.RunResult,
    output_dir: Optional[pathlib.Path],
) -> None:
    """Print the run summary out to the console.

    :param options: Global options object
    :param result: The finished run
    :param output_dir: The directory that the run was written out to
    """
    if not options.quiet:
        click.echo(result.console_summary or result.summary)
    if output_dir and not options.quiet:
        click.echo(f"Results have been saved in {output_dir}")


def describe(values: Sequence[Tuple[str, Any]]) -> List[str]:
    """``("gram_residual", 1e-15)`` becomes ``"Gram residual: 1e-15"``."""
    return [
        f"{name.replace('_', ' ').capitalize()}: {value!r}" for name, value in values
    ]


def settings_from(values: Dict[str, Any], *exclude: str) -> Dict[str, Any]:
    """Keep the subcommand parameters that belong in the run configuration."""
    return {
        key: value
        for key, value in values.items()
        if key not in exclude and value is not None
    }
