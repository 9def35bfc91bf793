import os
import shutil
import tempfile
import unittest
from unittest.mock import patch

from exceptions import ConfigurationError
from schemas.experiment_schemas import parse_experiment_config
from services.experiment_service import StageRunner, run_experiment, stage_rng
from services.report_service import read_results

TINY_MATRIX = """
[experiment]
name = tiny
env = matrix
seeds = 2
output = {output}

[matrix]
alphas = 0.3
iterations = 2
tasks_per_iteration = 3
predictor_iterations = 2
predictor_episodes = 4
predictor_dataset = 8

[ppo]
epochs = 1
minibatch_size = 15

[eval]
episodes = 4
oracle_layouts = 20
"""


class TestStages(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_stage_runs_once(self):
        runner = StageRunner(self.directory)
        calls = []
        self.assertTrue(runner.run("train", lambda: calls.append(1)))
        self.assertTrue(runner.is_done("train"))
        self.assertFalse(runner.run("train", lambda: calls.append(2)))
        self.assertEqual(calls, [1])
        self.assertTrue(os.path.exists(os.path.join(self.directory, "stages", "train.done")))

    def test_failed_stage_leaves_no_marker(self):
        runner = StageRunner(self.directory)

        def fail():
            raise ConfigurationError("broken")

        with self.assertRaises(ConfigurationError):
            runner.run("train", fail)
        self.assertFalse(runner.is_done("train"))

    def test_stage_rng(self):
        self.assertEqual(stage_rng(3, "bc").random(), stage_rng(3, "bc").random())
        self.assertNotEqual(stage_rng(3, "bc").random(), stage_rng(3, "rl2").random())
        self.assertNotEqual(stage_rng(3, "bc").random(), stage_rng(4, "bc").random())


class TestMatrixExperiment(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.config = parse_experiment_config(TINY_MATRIX.format(output=self.directory))
        self.progress_patcher = patch("config.settings.SHOW_PROGRESS", False)
        self.progress_patcher.start()

    def tearDown(self):
        self.progress_patcher.stop()
        shutil.rmtree(self.directory)

    def test_run_and_resume(self):
        root = run_experiment(self.config)
        self.assertEqual(root, os.path.join(self.directory, "tiny", "seeds_0-1"))
        rows = read_results(os.path.join(root, "results.csv"))
        self.assertEqual(
            sorted({(row.experiment, row.partner) for row in rows}),
            [("bc", "dist:0.3"), ("oracle", "dist:0.3"), ("rl2", "dist:0.3")],
        )
        self.assertTrue(os.path.exists(os.path.join(root, "summary.csv")))
        self.assertTrue(os.path.exists(os.path.join(root, "curves.csv")))
        with open(os.path.join(root, "results.csv"), "rb") as handle:
            first = handle.read()

        # interrupted after training seed 1: its evaluation and the report must be redone
        os.remove(os.path.join(root, "stages", "report.done"))
        os.remove(os.path.join(root, "seed_1", "stages", "eval.done"))
        os.remove(os.path.join(root, "seed_1", "results.csv"))
        with patch("services.experiment_service.train_matrix_bc_policy", side_effect=AssertionError("retrained")):
            run_experiment(self.config)
        with open(os.path.join(root, "results.csv"), "rb") as handle:
            self.assertEqual(handle.read(), first)

    def test_seed_ranges_do_not_share_a_root(self):
        roots = []
        for first_seed in (0, 5):
            text = TINY_MATRIX.format(output=self.directory).replace("seeds = 2", f"seeds = 1\nfirst_seed = {first_seed}")
            roots.append(run_experiment(parse_experiment_config(text)))
        self.assertNotEqual(roots[0], roots[1])
        for root, seed in zip(roots, (0, 5)):
            rows = read_results(os.path.join(root, "results.csv"))
            self.assertEqual({row.seed for row in rows if row.experiment != "oracle"}, {seed})

    def test_reference_seed_must_not_train(self):
        config = parse_experiment_config(
            f"[experiment]\nname = grid\nenv = tsg\nseeds = 2\noutput = {self.directory}\n\n[tsg]\nreference_seed = 1\n"
        )
        with self.assertRaises(ConfigurationError) as context:
            run_experiment(config)
        self.assertEqual(context.exception.code, "PARTNER_OVERLAP")


if __name__ == "__main__":
    unittest.main()
