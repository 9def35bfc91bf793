import unittest

import numpy as np

from envs.dirichlet import sample_dirichlet, sample_partner_distribution
from envs.matrix import (
    PAYOFF_MATRIX,
    best_response,
    encode_matrix_obs,
    encode_matrix_obs_batch,
    expected_payoffs,
    matrix_step,
    oracle_last_step_value,
)
from envs.oracles import (
    format_layout_line,
    joint_optimal_plan,
    monte_carlo_optimal,
    optimal_return,
    parse_layout_line,
    solo_optimal_plan,
)
from envs.tsg import PAIR_WIDTH, TsgState, encode_pairs, episode_return, tsg_reset, tsg_step
from exceptions import ConfigurationError, UsageError
from schemas.env_schemas import ActionDistribution, TsgConfig

UP, DOWN, LEFT, RIGHT = range(4)


def _state(a, b, subgoals, final, collected=None):
    return TsgState(
        pos_a=a,
        pos_b=b,
        subgoal_pos=tuple(subgoals),
        final_pos=final,
        collected=tuple(collected) if collected else (False,) * len(subgoals),
    )


class TestDirichlet(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_samples_lie_on_simplex(self):
        for alpha in (0.001, 0.01, 0.3, 1.0, 30.0):
            sample = sample_dirichlet(alpha, 5, self.rng)
            self.assertTrue(np.all(sample >= 0.0))
            self.assertAlmostEqual(sample.sum(), 1.0, places=12)

    def test_small_concentration_is_near_deterministic(self):
        peaked = [sample_dirichlet(0.01, 5, self.rng).max() > 0.99 for _ in range(2000)]
        self.assertGreater(np.mean(peaked), 0.9)

    def test_moments(self):
        alpha = 1.0
        samples = np.stack([sample_dirichlet(alpha, 5, self.rng) for _ in range(10000)])
        np.testing.assert_allclose(samples.mean(axis=0), np.full(5, 0.2), atol=0.01)
        expected_var = 0.16 / (5 * alpha + 1)
        np.testing.assert_allclose(samples.var(axis=0), np.full(5, expected_var), rtol=0.1)

    def test_invalid_concentration(self):
        for alpha in (0.0, -1.0, float("nan")):
            with self.assertRaises(ConfigurationError):
                sample_dirichlet(alpha, 5, self.rng)

    def test_partner_distribution_schema(self):
        dist = sample_partner_distribution(0.1, self.rng)
        self.assertIsInstance(dist, ActionDistribution)
        self.assertEqual(len(dist.probs), 5)


class TestMatrixGame(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(3)

    def test_payoff_matrix_entries(self):
        expected = [
            [1.0, -0.7, -0.4, -0.1, 0.0],
            [-1.0, 0.8, -0.4, -0.1, 0.0],
            [-1.0, -0.7, 0.6, -0.1, 0.0],
            [-1.0, -0.7, -0.4, 0.4, 0.0],
            [-1.0, -0.7, -0.4, -0.1, 0.2],
        ]
        for p in range(5):
            for m in range(5):
                self.assertEqual(PAYOFF_MATRIX[p, m], expected[p][m], f"p{p} m{m}")

    def test_step_rewards(self):
        self.assertEqual(matrix_step(ActionDistribution.delta(0), 0, self.rng), (0, 1.0))
        self.assertEqual(matrix_step(ActionDistribution.delta(1), 1, self.rng), (1, 0.8))
        for _ in range(50):
            partner, reward = matrix_step(np.array([0.25, 0.25, 0.25, 0.25, 0.0]), 4, self.rng)
            self.assertNotEqual(partner, 4)
            self.assertEqual(reward, 0.0)
        with self.assertRaises(ConfigurationError):
            matrix_step(ActionDistribution.uniform(), 5, self.rng)

    def test_best_response_examples(self):
        self.assertEqual(best_response(ActionDistribution.delta(1)), (1, 0.8))
        action, value = best_response(ActionDistribution.uniform())
        self.assertEqual(action, 4)
        self.assertAlmostEqual(value, 0.04, delta=1e-12)
        np.testing.assert_allclose(expected_payoffs(ActionDistribution.uniform()), [-0.6, -0.4, -0.2, 0.0, 0.04], atol=1e-12)
        action, value = best_response(np.array([0.5, 0.5, 0.0, 0.0, 0.0]))
        self.assertEqual(action, 1)
        self.assertAlmostEqual(value, 0.05, delta=1e-12)

    def test_best_response_dominates_every_column(self):
        for _ in range(1000):
            dist = sample_dirichlet(0.5, 5, self.rng)
            action, value = best_response(dist)
            self.assertTrue(np.all(value >= expected_payoffs(dist)))
            self.assertEqual(value, expected_payoffs(dist)[action])

    def test_observation_encoding(self):
        first = encode_matrix_obs(-1, -1, 0, 10)
        np.testing.assert_array_equal(first, np.zeros(11))
        obs = encode_matrix_obs(2, 4, 3, 10)
        self.assertEqual(obs[2], 1.0)
        self.assertEqual(obs[5 + 4], 1.0)
        self.assertAlmostEqual(obs[-1], 0.3)
        batch = encode_matrix_obs_batch(np.array([2, -1]), np.array([4, -1]), 3, 10)
        np.testing.assert_array_equal(batch[0], obs)
        np.testing.assert_array_equal(batch[1, :-1], np.zeros(10))

    def test_oracle_value_bounds(self):
        value = oracle_last_step_value(0.01, 500, self.rng)
        self.assertGreater(value, 0.2)
        self.assertLessEqual(value, 1.0)


class TestGridworld(unittest.TestCase):

    def setUp(self):
        self.cfg = TsgConfig()
        self.rng = np.random.default_rng(11)

    def test_reset_places_distinct_objects(self):
        state = tsg_reset(self.cfg, self.rng)
        self.assertEqual(len(set(state.cells())), 7)
        self.assertEqual(state.t, 0)
        self.assertFalse(any(state.collected))
        again = tsg_reset(self.cfg, np.random.default_rng(5))
        self.assertEqual(again, tsg_reset(self.cfg, np.random.default_rng(5)))

    def test_reset_is_uniform_over_cells(self):
        n = 10000
        counts = np.zeros((self.cfg.height, self.cfg.width))
        for _ in range(n):
            x, y = tsg_reset(self.cfg, self.rng).pos_a
            counts[y, x] += 1
        p = 1.0 / counts.size
        sigma = np.sqrt(n * p * (1 - p))
        self.assertTrue(np.all(np.abs(counts - n * p) < 5 * sigma))

    def test_plain_move(self):
        state = _state((5, 5), (0, 0), [(9, 9), (9, 8), (9, 7), (9, 6)], (1, 9))
        next_state, reward, done = tsg_step(state, UP, LEFT, self.cfg)
        self.assertEqual(next_state.pos_a, (5, 4))
        self.assertEqual(next_state.pos_b, (0, 0))
        self.assertAlmostEqual(reward, -0.01)
        self.assertFalse(done)
        self.assertEqual(next_state.t, 1)

    def test_shared_subgoal_counts_once(self):
        state = _state((4, 5), (6, 5), [(5, 5), (9, 8), (9, 7), (9, 6)], (1, 9))
        next_state, reward, _ = tsg_step(state, RIGHT, LEFT, self.cfg)
        self.assertAlmostEqual(reward, 0.04)
        self.assertEqual(next_state.collected, (True, False, False, False))

    def test_final_goal_needs_every_subgoal(self):
        state = _state((4, 5), (0, 0), [(9, 9), (9, 8), (9, 7), (9, 6)], (5, 5))
        next_state, reward, done = tsg_step(state, RIGHT, UP, self.cfg)
        self.assertFalse(next_state.final_collected)
        self.assertFalse(done)
        self.assertAlmostEqual(reward, -0.01)

        ready = _state((4, 5), (0, 0), [(9, 9), (9, 8), (9, 7), (9, 6)], (5, 5), [True] * 4)
        finished, reward, done = tsg_step(ready, RIGHT, UP, self.cfg)
        self.assertTrue(finished.final_collected)
        self.assertTrue(done)
        self.assertAlmostEqual(reward, 0.04)
        with self.assertRaises(UsageError):
            tsg_step(finished, UP, UP, self.cfg)

    def test_time_limit(self):
        cfg = TsgConfig(max_steps=2)
        state = _state((5, 5), (0, 0), [(9, 9), (9, 8), (9, 7), (9, 6)], (1, 9))
        state, _, done = tsg_step(state, UP, UP, cfg)
        self.assertFalse(done)
        state, _, done = tsg_step(state, UP, UP, cfg)
        self.assertTrue(done)

    def test_pair_encoding(self):
        state = _state((1, 2), (3, 4), [(5, 6), (7, 8), (9, 10), (0, 1)], (2, 2), [True, False, False, False])
        own = encode_pairs(state, 0, self.cfg)
        other = encode_pairs(state, 1, self.cfg)
        self.assertEqual(own.shape, (12, PAIR_WIDTH))
        self.assertEqual(own[1, 8], 1.0)
        self.assertEqual(own[2, 8], 0.0)
        # observer A's block reappears as the second block from B's point of view
        np.testing.assert_array_equal(own[:6, :4], other[6:, :4])
        np.testing.assert_array_equal(own[1:6, 4:9], other[7:, 4:9])
        self.assertEqual(own[0, 5], 1.0)
        self.assertEqual(other[6, 4], 1.0)
        np.testing.assert_array_equal(own[:6, 9], np.ones(6))
        np.testing.assert_array_equal(other[6:, 9], np.zeros(6))

    def test_episode_return_identity(self):
        self.assertAlmostEqual(episode_return(5, 13, self.cfg), 0.25 - 0.13)


class TestPlanners(unittest.TestCase):

    def setUp(self):
        self.cfg = TsgConfig()

    def test_split_sweep(self):
        state = _state((0, 0), (10, 10), [(0, 1), (0, 2), (10, 9), (10, 8)], (5, 5))
        self.assertEqual(joint_optimal_plan(state), 10)

    def test_single_file_chain(self):
        state = _state((0, 0), (10, 10), [(0, 1), (0, 2), (0, 3), (0, 4)], (0, 5))
        self.assertEqual(joint_optimal_plan(state), 5)
        self.assertEqual(solo_optimal_plan(state, agent=0), 5)

    def test_joint_never_exceeds_solo_and_mirror_is_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            state = tsg_reset(self.cfg, rng)
            joint = joint_optimal_plan(state)
            self.assertLessEqual(joint, solo_optimal_plan(state))
            self.assertEqual(joint_optimal_plan(state.mirrored(self.cfg)), joint)

    def test_planner_needs_fresh_layout(self):
        state = _state((0, 0), (10, 10), [(0, 1), (0, 2), (10, 9), (10, 8)], (5, 5))
        moved, _, _ = tsg_step(state, DOWN, UP, self.cfg)
        with self.assertRaises(UsageError):
            joint_optimal_plan(moved)

    def test_monte_carlo_means(self):
        lengths = monte_carlo_optimal(400, self.cfg, np.random.default_rng(0))
        self.assertAlmostEqual(np.mean(lengths["joint"]), 12.9, delta=1.0)
        self.assertAlmostEqual(np.mean(lengths["solo"]), 26.2, delta=1.5)
        self.assertAlmostEqual(optimal_return(12.9, self.cfg), 0.121)
        self.assertAlmostEqual(optimal_return(26.2, self.cfg), -0.012)

    def test_layout_line_round_trip(self):
        state = _state((0, 0), (10, 10), [(0, 1), (0, 2), (10, 9), (10, 8)], (5, 5))
        line = format_layout_line(state, 10, 19)
        self.assertEqual(line, "0,0;10,10;0,1;0,2;10,9;10,8;5,5 → 10,19")
        parsed, joint, solo = parse_layout_line(line.replace("→", "->"))
        self.assertEqual(parsed, state)
        self.assertEqual((joint, solo), (10, 19))


if __name__ == "__main__":
    unittest.main()
