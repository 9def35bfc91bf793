import os
import shutil
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from models.agents import matrix_conditioned_agent, rl2_agent
from models.autodiff import Tape
from models.optim import init_opt_state
from models.params import ParamSet
from schemas.env_schemas import MatrixConfig
from schemas.training_schemas import OptimConfig, PpoHyper
from services.ppo_service import (
    PpoTrainer,
    _step_terms,
    compute_gae,
    ppo_update,
    read_stats_csv,
    write_stats_csv,
)
from services.rollout_service import DirichletPartners, MatrixEnvAdapter, collect_rollouts


def naive_gae(rewards, values, dones, gamma, lam):
    """Double loop over the discounted TD residuals of the rest of each episode"""
    n = len(rewards)
    advantages = np.zeros(n)
    for t in range(n):
        total, weight = 0.0, 1.0
        for k in range(t, n):
            last = dones[k] or k == n - 1
            next_value = 0.0 if last else values[k + 1]
            total += weight * (rewards[k] + gamma * next_value - values[k])
            if last:
                break
            weight *= gamma * lam
        advantages[t] = total
    return advantages


class TestGae(unittest.TestCase):

    def test_one_step_identity(self):
        advantages, returns = compute_gae(
            np.array([0.04, 0.0]), np.array([0.12, 0.10]), np.array([False, True]), gamma=1.0, lam=1e-12
        )
        self.assertAlmostEqual(advantages[0], 0.02, places=10)
        self.assertAlmostEqual(returns[0], 0.14, places=10)

    def test_terminal_step_bootstraps_from_zero(self):
        advantages, _ = compute_gae(np.array([1.0]), np.array([0.4]), np.array([True]), gamma=0.9, lam=0.9)
        self.assertAlmostEqual(advantages[0], 0.6)

    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            rewards = rng.normal(size=n)
            values = rng.normal(size=n)
            dones = rng.random(n) < 0.2
            gamma, lam = rng.uniform(0.5, 1.0), rng.uniform(0.0, 1.0)
            advantages, returns = compute_gae(rewards, values, dones, gamma, lam)
            np.testing.assert_allclose(advantages, naive_gae(rewards, values, dones, gamma, lam), atol=1e-12)
            np.testing.assert_allclose(returns, advantages + values, atol=1e-12)


class TestSurrogate(unittest.TestCase):

    def setUp(self):
        self.hyper = PpoHyper(clip_epsilon=0.2)
        self.tape = Tape(ParamSet())
        # new policy gives action 0 probability 0.75, the behaviour policy gave 0.5
        self.logits = self.tape.const(np.log([[0.75, 0.25]]))
        self.values = self.tape.const([[0.0]])

    def _terms(self, advantage):
        return _step_terms(
            self.logits, self.values, np.array([0]), np.log([0.5]), np.array([advantage]),
            np.array([1.0]), np.ones(1), self.hyper,
        )

    def test_positive_advantage_is_clipped(self):
        _, (policy, value, _, ratio_sum, clipped) = self._terms(1.0)
        self.assertAlmostEqual(ratio_sum, 1.5)
        self.assertAlmostEqual(policy, -1.2)
        self.assertAlmostEqual(value, 1.0)
        self.assertEqual(clipped, 1.0)

    def test_negative_advantage_keeps_unclipped_ratio(self):
        _, (policy, _, _, _, _) = self._terms(-1.0)
        self.assertAlmostEqual(policy, 1.5)

    def test_masked_steps_contribute_nothing(self):
        _, floats = _step_terms(
            self.logits, self.values, np.array([0]), np.log([0.5]), np.array([1.0]),
            np.array([1.0]), np.zeros(1), self.hyper,
        )
        self.assertEqual(floats, (0.0, 0.0, 0.0, 0.0, 0.0))


class TestPpoUpdate(unittest.TestCase):

    def setUp(self):
        self.cfg = MatrixConfig(alpha=1.0, episode_length=10, tasks_per_iteration=8)
        self.env = MatrixEnvAdapter(self.cfg)
        self.hyper = PpoHyper(batch_steps=80, minibatch_size=40, epochs=2)

    def _batch(self, agent, params, env=None):
        return collect_rollouts(env or self.env, agent, params, DirichletPartners(1.0), 80, np.random.default_rng(1))

    def test_update_changes_parameters(self):
        agent = matrix_conditioned_agent()
        params = agent.init_params(np.random.default_rng(0))
        opt = init_opt_state(params, OptimConfig(learning_rate=1e-2, final_learning_rate=1e-2))
        new_params, new_opt, stats = ppo_update(agent, params, opt, self._batch(agent, params), self.hyper, np.random.default_rng(2))
        self.assertEqual(new_opt.step, 4)
        self.assertFalse(np.allclose(new_params["policy.b0.fc0.w"], params["policy.b0.fc0.w"]))
        self.assertGreaterEqual(stats.clip_fraction, 0.0)
        self.assertLessEqual(stats.clip_fraction, 1.0)
        self.assertTrue(np.isfinite(stats.value_loss))

    def test_zero_learning_rate_is_a_no_op(self):
        agent = matrix_conditioned_agent()
        params = agent.init_params(np.random.default_rng(0))
        opt = init_opt_state(params, OptimConfig(learning_rate=0.0, final_learning_rate=0.0))
        new_params, _, stats = ppo_update(agent, params, opt, self._batch(agent, params), self.hyper, np.random.default_rng(2))
        for name in params:
            np.testing.assert_array_equal(new_params[name], params[name])
        self.assertAlmostEqual(stats.mean_ratio, 1.0)
        self.assertEqual(stats.clip_fraction, 0.0)

    def test_recurrent_update(self):
        agent = rl2_agent()
        env = MatrixEnvAdapter(self.cfg, observation="rl2")
        params = agent.init_params(np.random.default_rng(0))
        opt = init_opt_state(params)
        new_params, _, stats = ppo_update(agent, params, opt, self._batch(agent, params, env), self.hyper, np.random.default_rng(3))
        self.assertTrue(all(np.all(np.isfinite(values)) for _, values in new_params.items()))
        self.assertAlmostEqual(stats.mean_ratio, 1.0, delta=0.5)


class TestTrainer(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.progress_patcher = patch("services.ppo_service.settings.SHOW_PROGRESS", False)
        self.progress_patcher.start()

    def tearDown(self):
        self.progress_patcher.stop()
        shutil.rmtree(self.directory)

    def test_train_and_stats_csv(self):
        cfg = MatrixConfig(alpha=0.3, episode_length=10, tasks_per_iteration=5)
        trainer = PpoTrainer(
            matrix_conditioned_agent(), MatrixEnvAdapter(cfg), PpoHyper(batch_steps=50, minibatch_size=25, epochs=1),
            np.random.default_rng(0), total_iterations=3,
        )
        seen = []
        history = trainer.train(DirichletPartners(0.3), 3, on_iteration=lambda i, params: seen.append(i))
        self.assertEqual(seen, [0, 1, 2])
        self.assertEqual([row.iteration for row in history], [0, 1, 2])
        self.assertTrue(all(row.mean_length == 10.0 for row in history))

        path = write_stats_csv(history, os.path.join(self.directory, "stats.csv"))
        self.assertEqual(read_stats_csv(path), history)
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
        self.assertEqual(header, "iteration,mean_return,mean_length,policy_loss,value_loss,clip_fraction,entropy")


if __name__ == "__main__":
    unittest.main()
