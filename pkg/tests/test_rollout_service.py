import unittest

import numpy as np

from envs.matrix import MATRIX_OBS_WIDTH
from envs.tsg import PAIR_WIDTH
from exceptions import ConfigurationError
from models.agents import matrix_conditioned_agent, rl2_agent, tsg_self_play_agent
from models.layers import Network
from models.networks import RL2_OBS_WIDTH, matrix_predictor_spec, tsg_policy_spec
from schemas.env_schemas import MatrixConfig
from services.rollout_service import (
    DirichletPartners,
    FixedDistributionPartners,
    FrozenPolicy,
    LabelledPartners,
    MatrixEnvAdapter,
    PredictorConditioner,
    SelfPlayPartners,
    TsgEnvAdapter,
    collect_episodes,
    collect_rollouts,
    observation_width,
    sample_categorical,
)
from tests.factories import SMALL_GRID, SMALL_NET


class TestMatrixRollouts(unittest.TestCase):

    def setUp(self):
        self.cfg = MatrixConfig(alpha=0.3, episode_length=10, tasks_per_iteration=6)
        self.env = MatrixEnvAdapter(self.cfg)
        self.agent = matrix_conditioned_agent()
        self.params = self.agent.init_params(np.random.default_rng(0))

    def test_batch_layout(self):
        batch = collect_rollouts(self.env, self.agent, self.params, DirichletPartners(0.3), 100, np.random.default_rng(1))
        self.assertEqual(len(batch), 120)
        self.assertEqual(batch.n_episodes, 12)
        np.testing.assert_array_equal(batch.episode_lengths(), np.full(12, 10.0))
        np.testing.assert_array_equal(np.flatnonzero(batch.dones), np.arange(9, 120, 10))
        np.testing.assert_array_equal(batch.timesteps[:10], np.arange(10))
        self.assertEqual(batch.observations.shape, (120, MATRIX_OBS_WIDTH))
        np.testing.assert_allclose(batch.labels.sum(axis=1), np.ones(120))

    def test_training_conditions_on_truth(self):
        batch = collect_rollouts(self.env, self.agent, self.params, DirichletPartners(0.3), 10, np.random.default_rng(1))
        np.testing.assert_array_equal(batch.conditioning, batch.labels)

    def test_rewards_follow_payoffs(self):
        partners = FixedDistributionPartners([np.eye(5)[0]], name="p0")
        batch = collect_rollouts(self.env, self.agent, self.params, partners, 10, np.random.default_rng(2))
        expected = np.where(batch.actions == 0, 1.0, -np.array([0.0, 0.7, 0.4, 0.1, 0.0])[batch.actions])
        np.testing.assert_allclose(batch.rewards, expected)
        self.assertEqual(batch.partners[0], "p0")

    def test_same_seed_same_batch(self):
        first = collect_rollouts(self.env, self.agent, self.params, DirichletPartners(0.3), 30, np.random.default_rng(9))
        second = collect_rollouts(self.env, self.agent, self.params, DirichletPartners(0.3), 30, np.random.default_rng(9))
        np.testing.assert_array_equal(first.actions, second.actions)
        np.testing.assert_array_equal(first.rewards, second.rewards)
        np.testing.assert_array_equal(first.log_probs, second.log_probs)

    def test_rl2_observation_stream(self):
        env = MatrixEnvAdapter(self.cfg, observation="rl2")
        agent = rl2_agent()
        params = agent.init_params(np.random.default_rng(0))
        batch = collect_episodes(env, agent, params, DirichletPartners(1.0), 2, np.random.default_rng(4))
        self.assertEqual(batch.observations.shape[1], RL2_OBS_WIDTH)
        self.assertEqual(observation_width(env), RL2_OBS_WIDTH)
        # step t carries the action and reward of step t-1
        second = batch.observations[1]
        self.assertEqual(np.argmax(second[:5]), batch.actions[0])
        self.assertAlmostEqual(second[5], batch.rewards[0])
        np.testing.assert_array_equal(batch.observations[0, :-1], np.zeros(RL2_OBS_WIDTH - 1))
        with self.assertRaises(ConfigurationError):
            MatrixEnvAdapter(self.cfg, observation="pixels")

    def test_predictor_conditioner_tracks_steps(self):
        predictor = Network(matrix_predictor_spec())
        conditioner = PredictorConditioner(predictor, predictor.init_params(np.random.default_rng(3)))
        batch = collect_episodes(
            self.env, self.agent, self.params, DirichletPartners(0.3), 4, np.random.default_rng(5),
            conditioner=conditioner,
        )
        self.assertEqual(len(conditioner.history), 10)
        np.testing.assert_allclose(batch.conditioning.sum(axis=1), np.ones(len(batch)))
        self.assertFalse(np.allclose(batch.conditioning, batch.labels))


class TestGridworldRollouts(unittest.TestCase):

    def setUp(self):
        self.env = TsgEnvAdapter(SMALL_GRID, wave_size=3)
        self.agent = tsg_self_play_agent(SMALL_NET)
        self.params = self.agent.init_params(np.random.default_rng(0))

    def test_self_play_records_both_seats(self):
        batch = collect_episodes(self.env, self.agent, self.params, SelfPlayPartners(), 3, np.random.default_rng(1))
        self.assertEqual(batch.n_episodes, 6)
        returns = batch.episode_returns()
        np.testing.assert_allclose(returns[:3], returns[3:])
        self.assertEqual(batch.observations.shape[1:], (12, PAIR_WIDTH))
        self.assertTrue(np.all(batch.episode_lengths() <= SMALL_GRID.max_steps))

    def test_frozen_partner(self):
        network = Network(tsg_policy_spec(SMALL_NET))
        partner = FrozenPolicy(network, self.params, "novice")
        source = LabelledPartners([(partner, np.array([1.0, 0.0, 0.0]))])
        batch = collect_episodes(self.env, self.agent, self.params, source, 4, np.random.default_rng(2))
        self.assertEqual(batch.n_episodes, 4)
        self.assertEqual(batch.partners, ["novice"] * 4)
        np.testing.assert_array_equal(batch.labels, np.tile([1.0, 0.0, 0.0], (len(batch), 1)))

    def test_empty_pool(self):
        with self.assertRaises(ConfigurationError):
            LabelledPartners([])

    def test_episode_count_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            collect_episodes(self.env, self.agent, self.params, SelfPlayPartners(), 0, np.random.default_rng(0))


class TestSampling(unittest.TestCase):

    def test_one_hot_rows_are_deterministic(self):
        probs = np.eye(4)[[2, 0, 3]]
        np.testing.assert_array_equal(sample_categorical(probs, np.random.default_rng(0)), [2, 0, 3])

    def test_frequencies(self):
        rng = np.random.default_rng(1)
        probs = np.tile([0.1, 0.6, 0.3], (20000, 1))
        counts = np.bincount(sample_categorical(probs, rng), minlength=3) / 20000
        np.testing.assert_allclose(counts, [0.1, 0.6, 0.3], atol=0.015)


if __name__ == "__main__":
    unittest.main()
