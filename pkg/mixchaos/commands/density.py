from typing import List

import click

from mixchaos import bench, stats, types, util
from mixchaos.basis import build_basis


@click.command("density")
@click.option(
    "--coefficients",
    type=click.Path(exists=True, dir_okay=False, readable=True),
    required=True,
    help="A coefficients file written by the fit command.",
)
@click.option(
    "--samples",
    type=click.IntRange(min=stats.MIN_DENSITY_SAMPLES),
    default=1_000_000,
    show_default=True,
    help="Surrogate evaluations used for the density.",
)
@click.option(
    "--bins",
    type=click.IntRange(min=1),
    default=100,
    show_default=True,
    help="Histogram bins.",
)
@click.option(
    "--compare-mc/--no-compare-mc",
    is_flag=True,
    default=False,
    show_default=True,
    help="Also sample the model directly and report the L1 distance between the "
    "two densities.",
)
@click.pass_obj
@click.pass_context
def main(
    ctx: click.Context,
    options: types.GlobalOptions,
    coefficients: str,
    samples: int,
    bins: int,
    compare_mc: bool,
) -> types.RunResult:
    """Output density of a fitted surrogate under the mixture."""
    seeds = {"master": options.seed}
    tables: List[types.OutputTable] = []
    lines: List[str] = []
    try:
        setup = bench.resolve_setup(options.mixture, options.model, options.order)
        if compare_mc and setup.model is None:
            raise types.ValidationException("--compare-mc needs --model.")
        basis = build_basis(setup.mixture, setup.order, options.workers)
        surrogate = stats.load_coefficients(coefficients, basis)
        seeds["density"] = util.derive_seed(options.seed, "density")
        estimate = stats.density(
            surrogate, setup.mixture, samples, seeds["density"], bins
        )
        tables = stats.density_tables(estimate)
        lines = [
            f"Samples: {estimate.samples}",
            f"Bandwidth: {estimate.bandwidth!r}",
            f"Histogram modes: {len(stats.histogram_modes(estimate.counts))}",
        ]
        if compare_mc:
            seeds["mc"] = util.derive_seed(options.seed, "mc")
            baseline = bench.mc_baseline(
                setup.model,  # type: ignore
                setup.mixture,
                samples,
                seeds["mc"],
                bins,
                estimate.grid,
            )
            reference = baseline.density
            tables += stats.density_tables(reference, "mc_")
            lines += [
                "Monte Carlo histogram modes: "
                f"{len(stats.histogram_modes(reference.counts))}",
                f"L1 distance: {stats.density_l1_distance(estimate, reference)!r}",
            ]
    except (types.MixchaosException, OSError) as exc:
        util.fail(str(exc), ctx, util.exit_code_for(exc))
    return types.RunResult(
        "density",
        util.settings_from(ctx.params),
        seeds,
        tables,
        "\n".join(lines),
        None,
        int(types.ExitCode.OK),
    )
