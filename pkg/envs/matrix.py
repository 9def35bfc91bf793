from typing import Tuple, Union

import numpy as np

from envs.dirichlet import sample_dirichlet
from exceptions import ConfigurationError
from schemas.env_schemas import ActionDistribution

N_ACTIONS = 5

# rows: partner actions p0..p4, columns: main actions m0..m4
PAYOFF_MATRIX = np.array(
    [
        [1.0, -0.7, -0.4, -0.1, 0.0],
        [-1.0, 0.8, -0.4, -0.1, 0.0],
        [-1.0, -0.7, 0.6, -0.1, 0.0],
        [-1.0, -0.7, -0.4, 0.4, 0.0],
        [-1.0, -0.7, -0.4, -0.1, 0.2],
    ]
)

MATRIX_OBS_WIDTH = 2 * N_ACTIONS + 1

DistributionLike = Union[ActionDistribution, np.ndarray]


def _probs(dist: DistributionLike) -> np.ndarray:
    return dist.as_array() if isinstance(dist, ActionDistribution) else np.asarray(dist, dtype=np.float64)


def _check_action(action: int) -> None:
    if not 0 <= int(action) < N_ACTIONS:
        raise ConfigurationError(f"Action {action} is outside 0..{N_ACTIONS - 1}", code="INVALID_ACTION")


def one_hot(index: int, size: int = N_ACTIONS) -> np.ndarray:
    vector = np.zeros(size)
    if index >= 0:
        vector[index] = 1.0
    return vector


def matrix_step(dist: DistributionLike, main_action: int, rng: np.random.Generator) -> Tuple[int, float]:
    """Sample the partner's action and return the shared payoff"""
    _check_action(main_action)
    partner_action = int(rng.choice(N_ACTIONS, p=_probs(dist)))
    return partner_action, float(PAYOFF_MATRIX[partner_action, main_action])


def expected_payoffs(dist: DistributionLike) -> np.ndarray:
    """Expected reward of every main action against the distribution"""
    return _probs(dist) @ PAYOFF_MATRIX


def best_response(dist: DistributionLike) -> Tuple[int, float]:
    values = expected_payoffs(dist)
    action = int(np.argmax(values))
    return action, float(values[action])


def encode_matrix_obs(prev_partner: int, prev_main: int, t: int, horizon: int) -> np.ndarray:
    """Previous joint action as one-hots (zeros before the first step) plus t/horizon"""
    return np.concatenate([one_hot(prev_partner), one_hot(prev_main), [t / horizon]])


def encode_matrix_obs_batch(prev_partner: np.ndarray, prev_main: np.ndarray, t: int, horizon: int) -> np.ndarray:
    batch = prev_partner.shape[0]
    obs = np.zeros((batch, MATRIX_OBS_WIDTH))
    rows = np.arange(batch)
    started = prev_partner >= 0
    obs[rows[started], prev_partner[started]] = 1.0
    obs[rows[started], N_ACTIONS + prev_main[started]] = 1.0
    obs[:, -1] = t / horizon
    return obs


def oracle_last_step_value(alpha: float, n_samples: int, rng: np.random.Generator) -> float:
    """Monte-Carlo mean of the best-response value when the partner distribution is known"""
    total = 0.0
    for _ in range(n_samples):
        total += best_response(sample_dirichlet(alpha, N_ACTIONS, rng))[1]
    return total / n_samples
