from typing import List

import click

from mixchaos import bench, ftt, oracle, types, util
from mixchaos.indexing import format_exponents


@click.command("moments")
@click.option(
    "--standardize/--no-standardize",
    is_flag=True,
    default=True,
    show_default=True,
    help="Compute the moments of the standardized mixture, as used for the basis, "
    "instead of the mixture in original coordinates.",
)
@click.option(
    "--verify/--no-verify",
    is_flag=True,
    default=False,
    show_default=True,
    help="Cross-check every moment against Gauss-Hermite quadrature (d <= 4) or "
    "a random selection of moments against Monte Carlo.",
)
@click.option(
    "--tolerance",
    type=float,
    default=1e-8,
    show_default=True,
    help="Largest relative discrepancy accepted by the quadrature check.",
)
@click.option(
    "--verify-samples",
    type=click.IntRange(min=oracle.MIN_MC_SAMPLES),
    default=1_000_000,
    show_default=True,
    help="Samples drawn by the Monte Carlo check.",
)
@click.option(
    "--verify-count",
    type=click.IntRange(min=1),
    default=50,
    show_default=True,
    help="Number of moments checked by Monte Carlo.",
)
@click.pass_obj
@click.pass_context
def main(
    ctx: click.Context,
    options: types.GlobalOptions,
    standardize: bool,
    verify: bool,
    tolerance: float,
    verify_samples: int,
    verify_count: int,
) -> types.RunResult:
    """Compute every mixture moment up to twice the basis degree."""
    seeds = {"master": options.seed}
    tables = []
    lines: List[str] = []
    exit_code = int(types.ExitCode.OK)
    try:
        setup = bench.resolve_setup(options.mixture, options.model, options.order)
        gmm = setup.mixture.standardize()[1] if standardize else setup.mixture
        table = ftt.moment_table(gmm, setup.order, options.workers)
        tables.append(
            types.OutputTable(
                "moments.csv",
                ("exponents", "degree", "value"),
                [
                    (format_exponents(exponents), int(exponents.sum()), value)
                    for exponents, value in zip(table.order.exponents, table.values)
                ],
            )
        )
        lines += [
            f"Parameters: {gmm.dim}",
            f"Mixture components: {gmm.n_components}",
            f"Basis degree: {setup.order}",
            f"Moments computed: {len(table)} (degree <= {2 * setup.order})",
        ]
        if verify:
            seeds["oracle"] = util.derive_seed(options.seed, "oracle")
            report = oracle.verify_moments(
                table, gmm, seeds["oracle"], tolerance, verify_samples, verify_count
            )
            tables.append(
                types.OutputTable(
                    "verification.csv",
                    ("exponents", "engine", "oracle", "discrepancy", "standard_error"),
                    [
                        (
                            format_exponents(row.alpha.exponents),
                            row.engine,
                            row.oracle,
                            row.discrepancy,
                            row.standard_error,
                        )
                        for row in report.rows
                    ],
                )
            )
            lines.append(report.render())
            try:
                report.check()
            except types.OracleMismatch as exc:
                lines.append(f"Verification failed: {exc}")
                exit_code = int(exc.exit_code)
    except (types.MixchaosException, OSError) as exc:
        util.fail(str(exc), ctx, util.exit_code_for(exc))
    return types.RunResult(
        "moments",
        util.settings_from(ctx.params),
        seeds,
        tables,
        "\n".join(lines),
        None,
        exit_code,
    )
