from typing import Any, List, Tuple

import click
import numpy as np

from mixchaos import bench, stats, types, util
from mixchaos.basis import build_basis


@click.command("stats")
@click.option(
    "--coefficients",
    type=click.Path(exists=True, dir_okay=False, readable=True),
    required=True,
    help="A coefficients file written by the fit command.",
)
@click.option(
    "--check-samples",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="If positive, also estimate the mean and variance by sampling the "
    "surrogate this many times.",
)
@click.pass_obj
@click.pass_context
def main(
    ctx: click.Context,
    options: types.GlobalOptions,
    coefficients: str,
    check_samples: int,
) -> types.RunResult:
    """Mean and variance of a fitted surrogate, read off its coefficients."""
    seeds = {"master": options.seed}
    tables: List[types.OutputTable] = []
    lines: List[str] = []
    try:
        setup = bench.resolve_setup(options.mixture, options.model, options.order)
        basis = build_basis(setup.mixture, setup.order, options.workers)
        surrogate = stats.load_coefficients(coefficients, basis)
        values: List[Tuple[str, Any]] = [
            ("mean", stats.mean(surrogate)),
            ("variance", stats.variance(surrogate)),
            ("standard_deviation", stats.standard_deviation(surrogate)),
            ("basis_functions", basis.size),
            ("significant_coefficients", stats.significant_count(surrogate.coeffs)),
        ]
        if check_samples:
            seeds["check"] = util.derive_seed(options.seed, "check")
            points = setup.mixture.sample(check_samples, seeds["check"])
            sampled = surrogate.evaluate(points)
            spread = float(np.var(sampled, ddof=1)) if check_samples > 1 else 0.0
            values += [
                ("sampled_mean", float(np.mean(sampled))),
                ("sampled_variance", spread),
            ]
        tables.append(types.OutputTable("stats.csv", ("name", "value"), values))
        lines = util.describe(values)
    except (types.MixchaosException, OSError) as exc:
        util.fail(str(exc), ctx, util.exit_code_for(exc))
    return types.RunResult(
        "stats",
        util.settings_from(ctx.params),
        seeds,
        tables,
        "\n".join(lines),
        None,
        int(types.ExitCode.OK),
    )
