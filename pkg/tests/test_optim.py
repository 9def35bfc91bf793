import unittest

import numpy as np

from exceptions import ConfigurationError, NumericError
from models.optim import LearningRateSchedule, adam_update, advance_schedule, clip_by_global_norm, init_opt_state
from models.params import ParamSet
from schemas.training_schemas import OptimConfig


def _params(**records):
    params = ParamSet()
    for name, values in records.items():
        params.add(name, np.asarray(values, dtype=np.float64))
    return params


class TestAdam(unittest.TestCase):

    def setUp(self):
        self.params = _params(w=[[1.0, -1.0], [0.5, 2.0]], b=[0.0, 0.1])
        self.grads = _params(w=[[0.3, -0.2], [1.0, 0.0]], b=[-0.5, 0.5])

    def test_first_step_moves_by_learning_rate(self):
        opt = init_opt_state(self.params, OptimConfig(learning_rate=1e-2, final_learning_rate=1e-2))
        new_params, new_opt = adam_update(self.params, self.grads, opt)
        # bias-corrected first step is lr * sign(g) wherever g != 0
        expected = self.params["w"] - 1e-2 * np.sign(self.grads["w"])
        np.testing.assert_allclose(new_params["w"], expected, atol=1e-8)
        self.assertEqual(new_opt.step, 1)
        self.assertEqual(opt.step, 0)
        np.testing.assert_array_equal(self.params["w"], [[1.0, -1.0], [0.5, 2.0]])

    def test_two_steps_follow_the_bias_corrected_recursion(self):
        params = _params(x=[1.0], y=[3.0])
        opt = init_opt_state(params, OptimConfig(learning_rate=0.1, final_learning_rate=0.1))
        params, opt = adam_update(params, _params(x=[0.5], y=[0.0]), opt)
        # m = 0.05, v = 2.5e-4; corrected 0.5 and 0.25, so the step is 0.1 * 0.5 / 0.5
        self.assertAlmostEqual(params["x"][0], 0.9, places=7)
        params, opt = adam_update(params, _params(x=[-0.25], y=[0.0]), opt)
        # m = 0.02, v = 3.1225e-4; corrected by 1 - 0.9^2 and 1 - 0.999^2
        self.assertAlmostEqual(opt.first_moment["x"][0], 0.02, places=12)
        self.assertAlmostEqual(opt.second_moment["x"][0], 3.1225e-4, places=12)
        self.assertAlmostEqual(params["x"][0], 0.9 - 0.1 * (0.02 / 0.19) / np.sqrt(3.1225e-4 / 0.001999), places=7)
        self.assertAlmostEqual(params["x"][0], 0.8733663, places=6)
        self.assertEqual(params["y"][0], 3.0)
        self.assertEqual(opt.step, 2)

    def test_zero_learning_rate_keeps_parameters(self):
        opt = init_opt_state(self.params, OptimConfig(learning_rate=0.0, final_learning_rate=0.0))
        params = self.params
        for _ in range(5):
            params, opt = adam_update(params, self.grads, opt)
        for name in self.params:
            np.testing.assert_array_equal(params[name], self.params[name])

    def test_mismatched_gradients(self):
        opt = init_opt_state(self.params)
        with self.assertRaises(ConfigurationError):
            adam_update(self.params, _params(w=[[0.0, 0.0], [0.0, 0.0]]), opt)

    def test_non_finite_gradient(self):
        opt = init_opt_state(self.params)
        grads = self.grads.copy()
        grads.records["b"][0] = np.inf
        with self.assertRaises(NumericError):
            adam_update(self.params, grads, opt)

    def test_schedule_decays_linearly(self):
        schedule = LearningRateSchedule(initial=1.0, final=0.0, total_iterations=5)
        rates = []
        for iteration in range(6):
            schedule.iteration = iteration
            rates.append(schedule.rate())
        np.testing.assert_allclose(rates, [1.0, 0.75, 0.5, 0.25, 0.0, 0.0])

    def test_advance_schedule(self):
        opt = init_opt_state(self.params, OptimConfig(learning_rate=1.0, final_learning_rate=0.5), total_iterations=3)
        advance_schedule(opt, 2)
        self.assertAlmostEqual(opt.learning_rate, 0.5)

    def test_increasing_schedule_rejected(self):
        with self.assertRaises(ValueError):
            OptimConfig(learning_rate=1e-4, final_learning_rate=1e-3)


class TestClipping(unittest.TestCase):

    def test_clip_scales_to_max_norm(self):
        grads = _params(a=[3.0], b=[4.0])
        clipped, norm = clip_by_global_norm(grads, 1.0)
        self.assertAlmostEqual(norm, 5.0)
        np.testing.assert_allclose([clipped["a"][0], clipped["b"][0]], [0.6, 0.8])

    def test_small_gradients_untouched(self):
        grads = _params(a=[0.1])
        clipped, _ = clip_by_global_norm(grads, 1.0)
        self.assertIs(clipped, grads)
        unclipped, _ = clip_by_global_norm(_params(a=[100.0]), None)
        self.assertEqual(unclipped["a"][0], 100.0)


if __name__ == "__main__":
    unittest.main()
