import unittest
from pathlib import Path

import numpy as np
from click.testing import CliRunner

from mixchaos import bench, cli, stats, types
from mixchaos.basis import build_basis

from tests import helpers

DATA_DIR = Path(__file__).parent / "data"
TABLE = str(DATA_DIR / "tables" / "tiny2.csv")
# 1 + 0.8 E[x1] - 0.5 E[x2] + 0.3 E[x1 x2] under the tiny2 mixture
TINY2_MEAN = 1.1665
MODEL_ARGS = [
    "--model",
    "tiny2",
    "fit",
    "--pool-size",
    "200",
    "--holdout-size",
    "500",
    "--s-max",
    "5",
    "--density-samples",
    "0",
]


class OfflineFitTests(unittest.TestCase):
    def test_table_fit_reproduces_the_table(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main,
                [
                    "-od",
                    "out",
                    "--mixture",
                    "tiny2",
                    "-p",
                    "2",
                    "fit",
                    "--table",
                    TABLE,
                    "--s-max",
                    "5",
                    "--density-samples",
                    "0",
                ],
            )
            run = helpers.run_dir("out", "fit")
            names = sorted(path.name for path in run.iterdir())
            basis = build_basis(bench.get_model("tiny2").mixture, 2)
            surrogate = stats.load_coefficients(run / "coefficients.csv", basis)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(
            names,
            [
                "coefficients.csv",
                "config.toml",
                "convergence.csv",
                "samples.csv",
                "summary.txt",
            ],
        )
        table = bench.load_table(TABLE)
        np.testing.assert_allclose(
            surrogate.evaluate(table.points), table.outputs, atol=1e-8
        )
        self.assertAlmostEqual(stats.mean(surrogate), TINY2_MEAN, places=8)
        self.assertIn("Model evaluations: 0", result.output)
        self.assertIn("Stop reason: coefficients converged", result.output)

    def test_holdout_table_reports_testing_error(self):
        runner = CliRunner()
        result = runner.invoke(
            cli.main,
            [
                "--mixture",
                "tiny2",
                "-p",
                "2",
                "fit",
                "--table",
                TABLE,
                "--holdout-table",
                TABLE,
                "--s-max",
                "5",
                "--density-samples",
                "0",
            ],
        )
        self.assertEqual(result.exit_code, 0, result.output)
        line = next(
            text
            for text in result.output.splitlines()
            if text.startswith("Testing error")
        )
        self.assertLess(float(line.split(": ")[1]), 1e-8)

    def test_table_dimension_must_match_mixture(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main, ["--mixture", "tiny3", "-p", "2", "fit", "--table", TABLE]
            )
        self.assertEqual(result.exit_code, types.ExitCode.VALIDATION)
        self.assertIn(f"{TABLE} has 2 parameters, the mixture has 3.", result.output)

    def test_model_dimension_must_match_mixture(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main, ["--mixture", "tiny3", "--model", "tiny2", "fit"]
            )
        self.assertEqual(result.exit_code, types.ExitCode.VALIDATION)
        self.assertIn(
            "Model tiny2 takes 2 parameters, the mixture has 3.", result.output
        )

    def test_malformed_table_reports_the_line(self):
        runner = CliRunner()
        result = runner.invoke(
            cli.main,
            [
                "--mixture",
                "tiny2",
                "-p",
                "2",
                "fit",
                "--table",
                str(DATA_DIR / "tables" / "bad_row.csv"),
            ],
        )
        self.assertEqual(result.exit_code, types.ExitCode.VALIDATION)
        self.assertIn("line 6", result.output)

    def test_missing_table_is_a_usage_error(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main,
                ["--mixture", "tiny2", "-p", "2", "fit", "--table", "nope.csv"],
            )
        self.assertEqual(result.exit_code, 2)

    def test_fit_needs_a_model_or_a_table(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli.main, ["--mixture", "tiny2", "-p", "2", "fit"])
        self.assertEqual(result.exit_code, types.ExitCode.VALIDATION)
        self.assertIn("fit needs either --model or --table.", result.output)


class ModelFitTests(unittest.TestCase):
    def test_model_fit_recovers_the_model(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli.main, ["-od", "out"] + MODEL_ARGS)
            run = helpers.run_dir("out", "fit")
            coefficients = helpers.read_csv(run / "coefficients.csv")
            samples = helpers.read_csv(run / "samples.csv")
            convergence = helpers.read_csv(run / "convergence.csv")
            config_text = (run / "config.toml").read_text(encoding="utf8")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(len(coefficients), 6)
        self.assertAlmostEqual(float(coefficients[0]["value"]), TINY2_MEAN, places=8)
        self.assertEqual(list(samples[0]), ["order", "candidate", "xi1", "xi2", "y"])
        self.assertEqual(int(convergence[-1]["samples"]), len(samples))
        self.assertLess(float(convergence[-1]["testing_error"]), 1e-8)
        for purpose in ("pool = ", "holdout = "):
            self.assertIn(purpose, config_text)

    def test_order_zero_fits_the_constant(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli.main, ["-od", "out", "-p", "0"] + MODEL_ARGS)
            run = helpers.run_dir("out", "fit")
            coefficients = helpers.read_csv(run / "coefficients.csv")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("Basis functions: 1", result.output)
        self.assertEqual(len(coefficients), 1)
        self.assertEqual(coefficients[0]["exponents"], "0;0")

    def test_reruns_are_byte_identical(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            for output in ("first", "second"):
                runner.invoke(cli.main, ["-od", output] + MODEL_ARGS)
            first = helpers.run_dir("first", "fit")
            second = helpers.run_dir("second", "fit")
            self.assertEqual(first.name, second.name)
            for name in ("coefficients.csv", "samples.csv", "convergence.csv"):
                self.assertEqual(
                    (first / name).read_bytes(), (second / name).read_bytes()
                )

    def test_seed_changes_the_samples(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            runner.invoke(cli.main, ["-od", "first"] + MODEL_ARGS)
            runner.invoke(cli.main, ["-od", "second", "--seed", "1"] + MODEL_ARGS)
            first = helpers.run_dir("first", "fit")
            second = helpers.run_dir("second", "fit")
            self.assertNotEqual(first.name, second.name)
            self.assertNotEqual(
                (first / "samples.csv").read_bytes(),
                (second / "samples.csv").read_bytes(),
            )

    def test_config_file_reruns_the_job(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            runner.invoke(cli.main, ["-od", "first"] + MODEL_ARGS)
            first = helpers.run_dir("first", "fit")
            result = runner.invoke(
                cli.main,
                ["--config", str(first / "config.toml"), "-od", "second", "fit"],
            )
            second = helpers.run_dir("second", "fit")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(first.name, second.name)
            self.assertEqual(
                (first / "coefficients.csv").read_bytes(),
                (second / "coefficients.csv").read_bytes(),
            )

    def test_compare_random_writes_budget_curve(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main,
                ["-od", "out"]
                + MODEL_ARGS
                + ["--compare-random", "--budget", "20", "--budget", "10"],
            )
            rows = helpers.read_csv(helpers.run_dir("out", "fit") / "budget.csv")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual([row["budget"] for row in rows], ["10", "20"])
        self.assertIn("Budget 10: adaptive", result.output)

    def test_compare_mc_writes_precision_table_and_densities(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main,
                ["-od", "out"]
                + MODEL_ARGS[:-2]
                + [
                    "--density-samples",
                    "10000",
                    "--compare-mc",
                    "--mc-samples",
                    "100",
                    "--mc-samples",
                    "10000",
                ],
            )
            run = helpers.run_dir("out", "fit")
            names = {path.name for path in run.iterdir()}
            rows = helpers.read_csv(run / "mc.csv")
            summary = (run / "summary.txt").read_text(encoding="utf8")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertTrue(
            {"density.csv", "histogram.csv", "mc_density.csv", "mc_histogram.csv"}
            <= names
        )
        self.assertEqual([row["samples"] for row in rows], ["100", "10000"])
        self.assertIn("Monte Carlo", summary)
        self.assertIn(stats.UNDERLINE, summary)
        self.assertIn("Density L1 distance", summary)

    def test_compare_mc_needs_a_model(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main,
                [
                    "--mixture",
                    "tiny2",
                    "-p",
                    "2",
                    "fit",
                    "--table",
                    TABLE,
                    "--compare-mc",
                ],
            )
        self.assertEqual(result.exit_code, types.ExitCode.VALIDATION)
        self.assertIn("--compare-mc needs --model.", result.output)


if __name__ == "__main__":
    unittest.main()
