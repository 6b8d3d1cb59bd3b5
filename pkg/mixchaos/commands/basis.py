from typing import List

import click
import numpy as np

from mixchaos import bench, types, util
from mixchaos.basis import build_basis
from mixchaos.indexing import format_exponents


@click.command("basis")
@click.option(
    "--gram-samples",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="If positive, also estimate the Gram matrix of the basis from this many "
    "mixture samples and report its largest deviation from the identity.",
)
@click.pass_obj
@click.pass_context
def main(
    ctx: click.Context, options: types.GlobalOptions, gram_samples: int
) -> types.RunResult:
    """Build the orthonormal basis and dump its Cholesky factor."""
    seeds = {"master": options.seed}
    tables: List[types.OutputTable] = []
    lines: List[str] = []
    try:
        setup = bench.resolve_setup(options.mixture, options.model, options.order)
        basis = build_basis(setup.mixture, setup.order, options.workers)
        diagnostics = basis.diagnostics
        values = [
            ("size", basis.size),
            ("jitter", diagnostics.jitter),
            ("min_diagonal", diagnostics.min_diagonal),
            ("max_diagonal", diagnostics.max_diagonal),
            ("diagonal_ratio", diagnostics.diagonal_ratio),
            ("gram_residual", basis.gram_residual()),
            ("reconstruction_error", basis.reconstruction_error()),
        ]
        if gram_samples:
            seeds["gram"] = util.derive_seed(options.seed, "gram")
            points = setup.mixture.sample(gram_samples, seeds["gram"])
            gram = basis.empirical_gram(points)
            deviation = float(np.abs(gram - np.eye(basis.size)).max())
            values.append(("empirical_gram_deviation", deviation))
        rows, cols = np.tril_indices(basis.size)
        tables = [
            types.OutputTable(
                "indices.csv",
                ("position", "exponents", "degree"),
                [
                    (position, format_exponents(exponents), int(exponents.sum()))
                    for position, exponents in enumerate(basis.order.exponents)
                ],
            ),
            types.OutputTable(
                "cholesky.csv",
                ("row", "column", "value"),
                list(zip(rows, cols, basis.chol[rows, cols])),
            ),
            types.OutputTable("diagnostics.csv", ("name", "value"), values),
        ]
        lines = [
            f"Parameters: {basis.dim}",
            f"Basis degree: {basis.max_degree}",
        ]
        lines += util.describe(values)
        lines += [f"Warning: {warning}" for warning in diagnostics.warnings]
    except (types.MixchaosException, OSError) as exc:
        util.fail(str(exc), ctx, util.exit_code_for(exc))
    return types.RunResult(
        "basis",
        util.settings_from(ctx.params),
        seeds,
        tables,
        "\n".join(lines),
        None,
        int(types.ExitCode.OK),
    )
