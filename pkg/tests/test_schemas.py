import os
import shutil
import tempfile
import unittest

from exceptions import ConfigurationError, StorageError
from schemas.env_schemas import ActionDistribution, TsgConfig
from schemas.experiment_schemas import EvalRow, load_experiment_config, parse_experiment_config
from schemas.label_schemas import DistributionLabel, SkillLabel, SkillLevel
from schemas.network_schemas import LayerSpec, NetSpec


class TestExperimentConfig(unittest.TestCase):

    def test_defaults(self):
        config = parse_experiment_config("[experiment]\nname = grid\nenv = matrix\n")
        self.assertEqual(config.matrix.alphas, [0.01, 0.03, 0.1, 0.3, 1.0, 3.0])
        self.assertEqual(config.seeds, [0, 1, 2, 3, 4])
        self.assertEqual(config.eval.episodes, 1000)
        self.assertEqual(config.tsg.reference_seed, 1000)

    def test_sections_are_coerced(self):
        config = parse_experiment_config(
            "[experiment]\nname = grid\nenv = matrix\nseeds = 2\nfirst_seed = 10\n"
            "[matrix]\nalphas = 0.01, 1\ntasks_per_iteration = 4\nepisode_length = 5\ntrain_rl2 = false\n"
            "[ppo]\nminibatch_size = 100\n"
        )
        self.assertEqual(config.seeds, [10, 11])
        self.assertEqual(config.matrix.alphas, [0.01, 1.0])
        self.assertFalse(config.matrix.train_rl2)
        hyper = config.matrix_hyper()
        self.assertEqual(hyper.batch_steps, 20)
        self.assertEqual(hyper.minibatch_size, 20)
        self.assertTrue(config.seed_dir(10).endswith(os.path.join("grid", "seeds_10-11", "seed_10")))

    def test_invalid_values(self):
        for text in (
            "[experiment]\nname = grid\nenv = chess\n",
            "[experiment]\nname = grid\nenv = matrix\n[matrix]\nalphas = 0.1, -1\n",
            "[experiment]\nname = grid\nenv = matrix\n[optim]\nlearning_rate = 1e-4\nfinal_learning_rate = 1e-3\n",
            "[matrix]\nalphas = 0.1\n",
            "not an ini file",
        ):
            with self.assertRaises(ConfigurationError) as context:
                parse_experiment_config(text)
            self.assertEqual(context.exception.code, "BAD_CONFIG")

    def test_tsg_population_config(self):
        config = parse_experiment_config(
            "[experiment]\nname = grid\nenv = tsg\n[tsg]\nwidth = 7\nheight = 7\nbatch_steps = 500\npre_width = 32\n"
        )
        schedule = config.tsg.population_config(config.tsg_hyper(), config.optim)
        self.assertEqual(schedule.tsg.width, 7)
        self.assertEqual(schedule.hyper.batch_steps, 500)
        self.assertEqual(schedule.net.pre_width, 32)

    def test_missing_file(self):
        directory = tempfile.mkdtemp()
        try:
            with self.assertRaises(StorageError) as context:
                load_experiment_config(os.path.join(directory, "absent.ini"))
            self.assertEqual(context.exception.code, "MISSING_FILE")
        finally:
            shutil.rmtree(directory)


class TestModels(unittest.TestCase):

    def test_labels(self):
        label = SkillLabel.of(SkillLevel.INTERMEDIATE)
        self.assertTrue(label.is_one_hot)
        self.assertEqual(label.level, SkillLevel.INTERMEDIATE)
        self.assertFalse(SkillLabel(probs=[0.2, 0.5, 0.3]).is_one_hot)
        with self.assertRaises(ValueError):
            SkillLabel(probs=[0.5, 0.5])
        with self.assertRaises(ValueError):
            DistributionLabel(probs=[0.5, 0.5, 0.5, 0.0, -0.5])

    def test_action_distribution(self):
        self.assertEqual(ActionDistribution.delta(2).probs, [0.0, 0.0, 1.0, 0.0, 0.0])
        with self.assertRaises(ValueError):
            ActionDistribution(probs=[0.3, 0.3, 0.3, 0.0, 0.0])

    def test_grid_capacity(self):
        with self.assertRaises(ValueError):
            TsgConfig(width=2, height=3)

    def test_softmax_only_last(self):
        with self.assertRaises(ValueError):
            NetSpec(
                name="policy",
                input_width=4,
                layers=[LayerSpec(kind="feedforward", widths=[3], activation="softmax"), LayerSpec(kind="feedforward", widths=[2])],
            )

    def test_eval_row_rejects_negative_spread(self):
        with self.assertRaises(ValueError):
            EvalRow(experiment="bc", seed=0, partner="novice", n_episodes=1, mean_length=1.0, std_length=-1.0,
                    mean_return=0.0, std_return=0.0, mean_last_step_reward=0.0)


if __name__ == "__main__":
    unittest.main()
