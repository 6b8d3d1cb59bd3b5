from typing import List, Tuple

import click

from mixchaos import bench, stats, types, util


@click.command("mc")
@click.option(
    "--samples",
    type=click.IntRange(min=2),
    multiple=True,
    default=(100, 10_000, 1_000_000),
    show_default=True,
    help="Monte Carlo sample counts. Can be specified multiple times.",
)
@click.option(
    "--bins",
    type=click.IntRange(min=1),
    default=100,
    show_default=True,
    help="Histogram bins of the output density of the largest run.",
)
@click.pass_obj
@click.pass_context
def main(
    ctx: click.Context,
    options: types.GlobalOptions,
    samples: Tuple[int, ...],
    bins: int,
) -> types.RunResult:
    """Estimate mean, variance and density of a model by direct sampling."""
    seeds = {"master": options.seed}
    tables: List[types.OutputTable] = []
    lines: List[str] = []
    try:
        setup = bench.resolve_setup(options.mixture, options.model, options.order)
        if setup.model is None:
            raise types.ValidationException("mc needs --model.")
        rows = []
        baseline = None
        for count in sorted(samples):
            seeds[f"mc-{count}"] = util.derive_seed(options.seed, f"mc-{count}")
            baseline = bench.mc_baseline(
                setup.model, setup.mixture, count, seeds[f"mc-{count}"], bins
            )
            rows.append(
                (
                    baseline.samples,
                    baseline.mean,
                    baseline.mean_error,
                    baseline.variance,
                    baseline.variance_error,
                )
            )
            lines.append(
                f"{count} samples: mean {baseline.mean!r} +/- {baseline.mean_error!r}, "
                f"variance {baseline.variance!r} +/- {baseline.variance_error!r}"
            )
        tables.append(
            types.OutputTable(
                "mc.csv",
                ("samples", "mean", "mean_error", "variance", "variance_error"),
                rows,
            )
        )
        if baseline is not None:
            tables += stats.density_tables(baseline.density)
        lines.insert(0, f"Model: {setup.model.name} ({setup.model.description})")
    except (types.MixchaosException, OSError) as exc:
        util.fail(str(exc), ctx, util.exit_code_for(exc))
    return types.RunResult(
        "mc",
        util.settings_from(ctx.params),
        seeds,
        tables,
        "\n".join(lines),
        None,
        int(types.ExitCode.OK),
    )
