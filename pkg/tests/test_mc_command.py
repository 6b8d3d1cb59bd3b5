import unittest

from click.testing import CliRunner

from mixchaos import cli, types

from tests import helpers


class McCommandTests(unittest.TestCase):
    def test_every_sample_count_is_reported(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                cli.main,
                [
                    "-od",
                    "out",
                    "--model",
                    "tiny2",
                    "mc",
                    "--samples",
                    "20000",
                    "--samples",
                    "100",
                ],
            )
            run = helpers.run_dir("out", "mc")
            rows = helpers.read_csv(run / "mc.csv")
            histogram = helpers.read_csv(run / "histogram.csv")
            config_text = (run / "config.toml").read_text(encoding="utf8")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual([row["samples"] for row in rows], ["100", "20000"])
        self.assertEqual(sum(int(row["count"]) for row in histogram), 20000)
        self.assertAlmostEqual(float(rows[1]["mean"]), 1.1665, delta=0.05)
        self.assertIn("mc-100 = ", config_text)
        self.assertIn("Model: tiny2", result.output)

    def test_sample_counts_use_independent_streams(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            runner.invoke(
                cli.main,
                [
                    "-od",
                    "out",
                    "--model",
                    "tiny3",
                    "mc",
                    "--samples",
                    "100",
                    "--samples",
                    "200",
                ],
            )
            rows = helpers.read_csv(helpers.run_dir("out", "mc") / "mc.csv")
        self.assertNotEqual(rows[0]["mean"], rows[1]["mean"])

    def test_mc_needs_a_model(self):
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(cli.main, ["--mixture", "tiny2", "-p", "2", "mc"])
        self.assertEqual(result.exit_code, types.ExitCode.VALIDATION)
        self.assertIn("mc needs --model.", result.output)


if __name__ == "__main__":
    unittest.main()
