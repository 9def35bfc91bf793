import os
import shutil
import tempfile
import unittest

from exceptions import ConfigurationError
from schemas.experiment_schemas import EvalRow
from schemas.training_schemas import IterationStats
from services.report_service import (
    RESULT_FIELDS,
    aggregate_seeds,
    emit_report,
    read_results,
    sort_rows,
    write_curves,
    write_results,
)


def row(experiment="bc", seed=0, partner="skilled", mean_return=0.1, mean_length=12.0, last=0.04):
    return EvalRow(
        experiment=experiment,
        seed=seed,
        partner=partner,
        n_episodes=100,
        mean_length=mean_length,
        std_length=1.5,
        mean_return=mean_return,
        std_return=0.01,
        mean_last_step_reward=last,
    )


class TestAggregation(unittest.TestCase):

    def test_mean_and_population_std(self):
        rows = [row(seed=s, mean_return=value) for s, value in enumerate([0.08, 0.10, 0.12])]
        (summary,) = aggregate_seeds(rows)
        self.assertEqual(summary.n_seeds, 3)
        self.assertAlmostEqual(summary.mean_return, 0.10)
        self.assertAlmostEqual(summary.std_return, 0.0163299, places=6)
        self.assertEqual(summary.std_length, 0.0)

    def test_sample_std(self):
        rows = [row(seed=s, mean_return=value) for s, value in enumerate([0.08, 0.10, 0.12])]
        self.assertAlmostEqual(aggregate_seeds(rows, ddof=1)[0].std_return, 0.02)

    def test_groups_by_experiment_and_partner(self):
        rows = [
            row("lstm", 1, "novice"), row("bc", 0, "novice"), row("bc", 1, "novice"),
            row("lstm", 0, "novice"), row("bc", 0, "skilled"), row("bc", 1, "skilled"),
        ]
        keys = [(summary.experiment, summary.partner) for summary in aggregate_seeds(rows)]
        self.assertEqual(keys, [("bc", "novice"), ("bc", "skilled"), ("lstm", "novice")])

    def test_single_seed_group_rejected(self):
        with self.assertRaises(ConfigurationError) as context:
            aggregate_seeds([row(seed=0), row(seed=1), row(partner="novice")])
        self.assertEqual(context.exception.code, "TOO_FEW_SEEDS")
        with self.assertRaises(ConfigurationError):
            aggregate_seeds([])


class TestCsvOutput(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_results_are_sorted_and_reproducible(self):
        rows = [row("lstm", 0), row("bc", 1, mean_return=1 / 3), row("bc", 0, "novice")]
        path = write_results(rows, os.path.join(self.directory, "results.csv"))
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[0], ",".join(RESULT_FIELDS))
        self.assertEqual([line.split(",")[:3] for line in lines[1:]],
                         [["bc", "0", "novice"], ["bc", "1", "skilled"], ["lstm", "0", "skilled"]])

        loaded = read_results(path)
        self.assertEqual(loaded, sort_rows(rows))
        with open(path, "rb") as handle:
            first = handle.read()
        write_results(loaded, path)
        with open(path, "rb") as handle:
            self.assertEqual(handle.read(), first)

    def test_emit_report_skips_summary_for_single_seed(self):
        rows = [row("bc", 0), row("optimal", 0, mean_length=12.9)]
        written = emit_report(rows, self.directory)
        self.assertEqual([os.path.basename(path) for path in written], ["results.csv"])

    def test_emit_report_ignores_oracle_rows_in_summary(self):
        rows = [row("bc", 0), row("bc", 1), row("optimal", 0)]
        curves = [("bc", 0, "train", [IterationStats(
            iteration=0, mean_return=0.1, mean_length=10.0, policy_loss=0.0, value_loss=0.1, clip_fraction=0.0, entropy=1.0,
        )])]
        written = emit_report(rows, self.directory, curves, [("skill_predictor", 0, 0, 0.5, 10)])
        self.assertEqual(
            [os.path.basename(path) for path in written],
            ["results.csv", "summary.csv", "curves.csv", "predictor.csv"],
        )
        with open(os.path.join(self.directory, "summary.csv"), encoding="utf-8") as handle:
            self.assertEqual(len(handle.read().splitlines()), 2)

    def test_curve_header(self):
        path = write_curves([], os.path.join(self.directory, "curves.csv"))
        with open(path, encoding="utf-8") as handle:
            self.assertTrue(handle.readline().startswith("experiment,seed,key,iteration,mean_return"))


if __name__ == "__main__":
    unittest.main()
