from typing import Dict, List, Optional, Tuple

import click

from mixchaos import bench, solver, stats, types, util
from mixchaos.basis import BasisSet, build_basis
from mixchaos.gmm import GaussianMixture


def _pool_and_holdout(
    setup: bench.Setup,
    basis: BasisSet,
    table: Optional[str],
    holdout_table: Optional[str],
    pool_size: int,
    holdout_size: int,
    seeds: Dict[str, int],
) -> Tuple[solver.CandidatePool, Optional[solver.HoldoutSet]]:
    if table:
        samples = bench.load_table(table)
        if samples.dim != basis.dim:
            raise types.DimensionMismatch(
                f"{table} has {samples.dim} parameters, the mixture has {basis.dim}."
            )
        pool = solver.CandidatePool.from_table(basis, samples.points, samples.outputs)
    elif setup.model is None:
        raise types.ValidationException("fit needs either --model or --table.")
    else:
        seeds["pool"] = util.derive_seed(seeds["master"], "pool")
        pool = solver.CandidatePool.from_model(
            basis, setup.mixture, setup.model.evaluate, pool_size, seeds["pool"]
        )

    holdout = None
    if holdout_table:
        held = bench.load_table(holdout_table)
        if held.dim != basis.dim:
            raise types.DimensionMismatch(
                f"{holdout_table} has {held.dim} parameters, "
                f"the mixture has {basis.dim}."
            )
        holdout = solver.HoldoutSet.from_table(basis, held.points, held.outputs)
    elif setup.model is not None and holdout_size:
        seeds["holdout"] = util.derive_seed(seeds["master"], "holdout")
        holdout = solver.HoldoutSet.from_model(
            basis, setup.mixture, setup.model.evaluate, holdout_size, seeds["holdout"]
        )
    return pool, holdout


def _fit_tables(
    surrogate: stats.SurrogateModel,
    fit: solver.SparseFit,
    pool: solver.CandidatePool,
) -> List[types.OutputTable]:
    columns = tuple(f"xi{k}" for k in range(1, pool.points.shape[1] + 1))
    return [
        types.OutputTable(
            "coefficients.csv",
            stats.COEFFICIENT_COLUMNS,
            stats.coefficient_rows(surrogate),
        ),
        types.OutputTable(
            "samples.csv",
            ("order", "candidate") + columns + ("y",),
            [
                (order, candidate, *pool.points[candidate], output)
                for order, (candidate, output) in enumerate(
                    zip(fit.selected, fit.outputs)
                )
            ],
        ),
        types.OutputTable(
            "convergence.csv",
            (
                "outer",
                "inner",
                "samples",
                "candidate",
                "score",
                "training_error",
                "testing_error",
                "change",
            ),
            [
                (
                    record.outer,
                    record.inner,
                    record.samples,
                    record.candidate,
                    record.score,
                    record.training_error,
                    record.testing_error,
                    record.change,
                )
                for record in fit.history
            ],
        ),
    ]


def _compare_mc(
    model: bench.BlackBoxModel,
    gmm: GaussianMixture,
    surrogate: stats.SurrogateModel,
    samples: int,
    mc_samples: Tuple[int, ...],
    estimate: Optional[stats.DensityEstimate],
    bins: int,
    seed: int,
) -> Tuple[List[types.OutputTable], List[str], str]:
    baselines = [
        bench.mc_baseline(
            model,
            gmm,
            count,
            util.derive_seed(seed, f"mc-{count}"),
            bins,
            estimate.grid if estimate is not None else None,
        )
        for count in sorted(mc_samples)
    ]
    surrogate_mean = stats.mean(surrogate)
    table = types.OutputTable(
        "mc.csv",
        ("samples", "mean", "mean_error", "variance", "variance_error", "digits"),
        [
            (
                baseline.samples,
                baseline.mean,
                baseline.mean_error,
                baseline.variance,
                baseline.variance_error,
                stats.significant_digits_agree(surrogate_mean, baseline.mean),
            )
            for baseline in baselines
        ],
    )
    means = [(baseline.samples, baseline.mean) for baseline in baselines]
    lines = ["", stats.format_precision_table(samples, surrogate_mean, means)]
    styled = stats.format_precision_table(samples, surrogate_mean, means, styled=True)
    tables = [table]
    if estimate is not None:
        reference = baselines[-1].density
        lines.append(
            f"Density L1 distance to {baselines[-1].samples}-sample Monte Carlo: "
            f"{stats.density_l1_distance(estimate, reference)!r}"
        )
        lines.append(
            "Monte Carlo histogram modes: "
            f"{len(stats.histogram_modes(reference.counts))}"
        )
        tables += stats.density_tables(reference, "mc_")
    return tables, lines, styled


@click.command("fit")
@click.option(
    "--table",
    type=click.Path(exists=True, dir_okay=False, readable=True),
    help="Offline mode: a sample table whose rows form the candidate pool.",
)
@click.option(
    "--holdout-table",
    type=click.Path(exists=True, dir_okay=False, readable=True),
    help="A sample table used only to report the testing error.",
)
@click.option(
    "--pool-size",
    type=click.IntRange(min=2),
    default=1000,
    show_default=True,
    help="Candidate samples drawn from the mixture in model mode.",
)
@click.option(
    "--holdout-size",
    type=click.IntRange(min=0),
    default=9000,
    show_default=True,
    help="Fresh mixture samples used to report the testing error in model mode.",
)
@click.option(
    "--initial-samples",
    type=click.IntRange(min=1),
    help="Samples chosen by pivoted QR before the first sparse solve. "
    "[default: twice --s-max]",
)
@click.option(
    "--s-max",
    type=click.IntRange(min=1),
    default=40,
    show_default=True,
    help="Largest sparsity the sparse solver may use.",
)
@click.option(
    "--t-max",
    type=click.IntRange(min=1),
    default=30,
    show_default=True,
    help="Samples added adaptively between two sparse solves.",
)
@click.option(
    "--tol-stop",
    type=float,
    default=1e-3,
    show_default=True,
    help="Stop once the relative change of the coefficients falls below this.",
)
@click.option(
    "--outer-iterations",
    type=click.IntRange(min=1),
    default=3,
    show_default=True,
    help="Largest number of sparse solves.",
)
@click.option(
    "--max-samples",
    type=click.IntRange(min=2),
    help="Largest number of model evaluations. [default: the pool size]",
)
@click.option(
    "--cosamp-tol",
    type=float,
    default=1e-10,
    show_default=True,
    help="Relative residual at which the sparse solver stops.",
)
@click.option(
    "--cosamp-maxit",
    type=click.IntRange(min=1),
    default=100,
    show_default=True,
    help="Largest number of sparse solver iterations.",
)
@click.option(
    "--compare-random/--no-compare-random",
    is_flag=True,
    default=False,
    show_default=True,
    help="Also fit from randomly chosen samples at each --budget and report the "
    "testing errors of both selections.",
)
@click.option(
    "--budget",
    "budgets",
    type=click.IntRange(min=2),
    multiple=True,
    default=(100, 200, 300, 390),
    show_default=True,
    help="Sample budgets compared by --compare-random. Can be specified multiple "
    "times.",
)
@click.option(
    "--compare-mc/--no-compare-mc",
    is_flag=True,
    default=False,
    show_default=True,
    help="Compare the surrogate mean with direct Monte Carlo of the model.",
)
@click.option(
    "--mc-samples",
    type=click.IntRange(min=2),
    multiple=True,
    default=(100, 10_000, 1_000_000),
    show_default=True,
    help="Monte Carlo sample counts used by --compare-mc. Can be specified "
    "multiple times.",
)
@click.option(
    "--density-samples",
    type=click.IntRange(min=0),
    default=100_000,
    show_default=True,
    help="Surrogate evaluations used for the output density; 0 skips it.",
)
@click.option(
    "--bins",
    type=click.IntRange(min=1),
    default=100,
    show_default=True,
    help="Histogram bins of the output density.",
)
@click.pass_obj
@click.pass_context
def main(  # pylint: disable=too-many-arguments,too-many-locals
    ctx: click.Context,
    options: types.GlobalOptions,
    table: Optional[str],
    holdout_table: Optional[str],
    pool_size: int,
    holdout_size: int,
    initial_samples: Optional[int],
    s_max: int,
    t_max: int,
    tol_stop: float,
    outer_iterations: int,
    max_samples: Optional[int],
    cosamp_tol: float,
    cosamp_maxit: int,
    compare_random: bool,
    budgets: Tuple[int, ...],
    compare_mc: bool,
    mc_samples: Tuple[int, ...],
    density_samples: int,
    bins: int,
) -> types.RunResult:
    """Fit sparse expansion coefficients from adaptively chosen samples."""
    solver_options = types.SolverOptions(
        initial_samples=initial_samples,
        s_max=s_max,
        t_max=t_max,
        tol_stop=tol_stop,
        outer_iterations=outer_iterations,
        pool_size=pool_size,
        cosamp_tol=cosamp_tol,
        cosamp_maxit=cosamp_maxit,
        max_samples=max_samples,
    )
    seeds = {"master": options.seed}
    tables: List[types.OutputTable] = []
    lines: List[str] = []
    styled: Optional[str] = None
    try:
        setup = bench.resolve_setup(options.mixture, options.model, options.order)
        if compare_mc and setup.model is None:
            raise types.ValidationException("--compare-mc needs --model.")
        basis = build_basis(setup.mixture, setup.order, options.workers)
        pool, holdout = _pool_and_holdout(
            setup, basis, table, holdout_table, pool_size, holdout_size, seeds
        )
        fit = solver.adaptive_fit(pool, basis, solver_options, holdout)
        surrogate = stats.SurrogateModel(
            basis, fit.coeffs, {"samples": fit.samples, "stop_reason": fit.stop_reason}
        )
        tables = _fit_tables(surrogate, fit, pool)
        last = fit.history[-1] if fit.history else None
        lines = [
            f"Model: {setup.model.name if setup.model else table}",
            f"Parameters: {basis.dim}",
            f"Basis degree: {basis.max_degree}",
            f"Basis functions: {basis.size}",
            f"Samples used: {fit.samples}",
            f"Model evaluations: {pool.evaluations}",
            f"Support size: {fit.sparsity}",
            f"Coefficients above 1e-3 of the largest: {fit.nonzero_count()}",
            f"Stop reason: {fit.stop_reason}",
            f"Mean: {stats.mean(surrogate)!r}",
            f"Variance: {stats.variance(surrogate)!r}",
            f"Standard deviation: {stats.standard_deviation(surrogate)!r}",
        ]
        if last is not None:
            lines.append(f"Training error: {last.training_error!r}")
            lines.append(f"Testing error: {last.testing_error!r}")
        lines += [f"Warning: {warning}" for warning in basis.diagnostics.warnings]
        lines += [f"Note: {note}" for note in fit.diagnostics]

        if compare_random:
            if holdout is None:
                raise types.ValidationException(
                    "--compare-random needs a held-out set "
                    "(--model or --holdout-table)."
                )
            seeds["random-baseline"] = util.derive_seed(options.seed, "random-baseline")
            curve = solver.budget_curve(
                pool,
                basis,
                solver_options,
                sorted(budgets),
                holdout,
                seeds["random-baseline"],
            )
            tables.append(
                types.OutputTable(
                    "budget.csv",
                    ("budget", "adaptive_samples", "adaptive_error", "random_error"),
                    [
                        (
                            point.budget,
                            point.adaptive_samples,
                            point.adaptive_error,
                            point.random_error,
                        )
                        for point in curve
                    ],
                )
            )
            lines.append("")
            lines += [
                f"Budget {point.budget}: adaptive {point.adaptive_error!r}, "
                f"random {point.random_error!r}"
                for point in curve
            ]

        estimate = None
        if density_samples:
            seeds["density"] = util.derive_seed(options.seed, "density")
            estimate = stats.density(
                surrogate, setup.mixture, density_samples, seeds["density"], bins
            )
            tables += stats.density_tables(estimate)
            lines.append(
                "Surrogate histogram modes: "
                f"{len(stats.histogram_modes(estimate.counts))}"
            )

        if compare_mc:
            seeds["mc"] = util.derive_seed(options.seed, "mc")
            mc_tables, mc_lines, precision = _compare_mc(
                setup.model,  # type: ignore
                setup.mixture,
                surrogate,
                fit.samples,
                mc_samples,
                estimate,
                bins,
                seeds["mc"],
            )
            tables += mc_tables
            styled = "\n".join(lines + [""] + [precision] + mc_lines[2:])
            lines += mc_lines
    except (types.MixchaosException, OSError) as exc:
        util.fail(str(exc), ctx, util.exit_code_for(exc))
    return types.RunResult(
        "fit",
        util.settings_from(ctx.params),
        seeds,
        tables,
        "\n".join(lines),
        styled,
        int(types.ExitCode.OK),
    )
