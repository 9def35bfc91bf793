"""
Batched episode collection.

Episodes run in lockstep waves; every wave draws one task per episode from a
partner source. A task carries the ground-truth label channel (given to the value
network, and to the policy only when a TruthConditioner is used) and the partner
behaviour the environment simulates.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from envs.dirichlet import sample_dirichlet
from envs.matrix import MATRIX_OBS_WIDTH, N_ACTIONS, PAYOFF_MATRIX, encode_matrix_obs_batch
from envs.tsg import PAIR_WIDTH, TsgState, encode_pairs_batch, tsg_reset, tsg_step
from exceptions import ConfigurationError
from models.agents import ActorCritic
from models.layers import Network, RecurrentState
from models.networks import RL2_OBS_WIDTH
from models.params import ParamSet
from schemas.env_schemas import MatrixConfig, TsgConfig

logger = logging.getLogger(__name__)

SELF_PLAY = "self"


@dataclass
class TransitionBatch:
    """Flat per-step storage; episodes are contiguous and ordered by episode id"""
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    labels: np.ndarray
    conditioning: Optional[np.ndarray]
    episode_ids: np.ndarray
    timesteps: np.ndarray
    partners: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    def episode_slices(self) -> List[Tuple[int, int]]:
        if len(self) == 0:
            return []
        boundaries = np.flatnonzero(np.diff(self.episode_ids)) + 1
        starts = np.concatenate([[0], boundaries])
        stops = np.concatenate([boundaries, [len(self)]])
        return [(int(a), int(b)) for a, b in zip(starts, stops)]

    @property
    def n_episodes(self) -> int:
        return len(self.episode_slices())

    def episode_returns(self) -> np.ndarray:
        return np.array([self.rewards[a:b].sum() for a, b in self.episode_slices()])

    def episode_lengths(self) -> np.ndarray:
        return np.array([b - a for a, b in self.episode_slices()], dtype=np.float64)

    def last_step_rewards(self) -> np.ndarray:
        return np.array([self.rewards[b - 1] for _, b in self.episode_slices()])


@dataclass
class EpisodeTask:
    label: np.ndarray
    partner: Any
    partner_name: str = ""


# partner sources

class DirichletPartners:
    """Fresh Dir(alpha) partner distributions; the distribution is the label"""

    def __init__(self, alpha: float):
        self.alpha = alpha

    def sample(self, n: int, rng: np.random.Generator) -> List[EpisodeTask]:
        tasks = []
        for _ in range(n):
            dist = sample_dirichlet(self.alpha, N_ACTIONS, rng)
            tasks.append(EpisodeTask(label=dist, partner=dist, partner_name=f"dist:{self.alpha:g}"))
        return tasks


class FixedDistributionPartners:
    """Cycles through given partner distributions"""

    def __init__(self, dists: Sequence[np.ndarray], name: str = "fixed"):
        self.dists = [np.asarray(d, dtype=np.float64) for d in dists]
        self.name = name
        self._cursor = 0

    def sample(self, n: int, rng: np.random.Generator) -> List[EpisodeTask]:
        tasks = []
        for _ in range(n):
            dist = self.dists[self._cursor % len(self.dists)]
            self._cursor += 1
            tasks.append(EpisodeTask(label=dist, partner=dist, partner_name=self.name))
        return tasks


class FrozenPolicy:
    """A gridworld partner acting with fixed parameters"""

    def __init__(self, network: Network, params: ParamSet, name: str = ""):
        self.network = network
        self.params = params
        self.name = name

    def act(self, pairs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        probs, _ = self.network.predict(self.params, pairs)
        return sample_categorical(probs, rng)


class LabelledPartners:
    """Uniform choice among labelled gridworld partners"""

    def __init__(self, entries: Sequence[Tuple[Any, np.ndarray]]):
        if not entries:
            raise ConfigurationError("Partner pool is empty", code="EMPTY_POOL")
        self.entries = list(entries)

    def sample(self, n: int, rng: np.random.Generator) -> List[EpisodeTask]:
        picks = rng.integers(len(self.entries), size=n)
        tasks = []
        for index in picks:
            partner, label = self.entries[int(index)]
            name = partner if isinstance(partner, str) else partner.name
            tasks.append(EpisodeTask(label=np.asarray(label, dtype=np.float64), partner=partner, partner_name=name))
        return tasks


class SelfPlayPartners(LabelledPartners):
    """Both seats run the learner's current parameters"""

    def __init__(self):
        super().__init__([(SELF_PLAY, np.zeros(0))])


# conditioning of the policy path

class NoConditioner:
    def start(self, batch: int) -> None:
        pass

    def condition(self, observations: np.ndarray, truth: np.ndarray) -> Optional[np.ndarray]:
        return None


class TruthConditioner(NoConditioner):
    """Training-time conditioning on the ground-truth label"""

    def condition(self, observations: np.ndarray, truth: np.ndarray) -> Optional[np.ndarray]:
        return truth


class PredictorConditioner(NoConditioner):
    """Execution-time conditioning on the predictor's running estimate; never reads the truth"""

    def __init__(self, network: Network, params: ParamSet):
        self.network = network
        self.params = params
        self.state: List[RecurrentState] = []
        self.history: List[np.ndarray] = []

    def start(self, batch: int) -> None:
        self.state = self.network.initial_state(batch)
        self.history = []

    def condition(self, observations: np.ndarray, truth: np.ndarray) -> Optional[np.ndarray]:
        prediction, self.state = self.network.predict(self.params, observations, self.state)
        self.history.append(prediction)
        return prediction


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    uniforms = rng.random(probs.shape[0])[:, None]
    choices = (np.cumsum(probs, axis=1) < uniforms).sum(axis=1)
    return np.minimum(choices, probs.shape[1] - 1)


class PolicyRunner:
    """Batched action selection that carries recurrent state across steps"""

    def __init__(self, agent: ActorCritic, params: ParamSet, batch: int, compute_values: bool = True):
        self.agent = agent
        self.params = params
        self.compute_values = compute_values
        self.policy_state, self.value_state = agent.initial_states(batch)

    def act(
        self,
        observations: np.ndarray,
        conditioning: Optional[np.ndarray],
        truth: np.ndarray,
        rng: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        probs, self.policy_state = self.agent.action_probs(self.params, observations, conditioning, self.policy_state)
        actions = sample_categorical(probs, rng)
        log_probs = np.log(np.maximum(probs[np.arange(len(actions)), actions], 1e-300))
        if self.compute_values:
            values, self.value_state = self.agent.state_values(self.params, observations, truth, self.value_state)
        else:
            values = np.zeros(len(actions))
        return actions, log_probs, values


class _EpisodeBuffer:
    def __init__(self, label: np.ndarray, partner_name: str):
        self.label = label
        self.partner_name = partner_name
        self.steps: Dict[str, List[Any]] = {
            key: [] for key in ("obs", "action", "reward", "value", "log_prob", "conditioning", "t")
        }

    def append(self, obs, action, reward, value, log_prob, conditioning, t) -> None:
        for key, item in zip(self.steps, (obs, action, reward, value, log_prob, conditioning, t)):
            self.steps[key].append(item)

    def __len__(self) -> int:
        return len(self.steps["action"])


# environments

class MatrixEnvAdapter:
    """Matrix game episodes; `observation` selects the plain stream or the RL² stream"""

    def __init__(self, cfg: Optional[MatrixConfig] = None, observation: str = "matrix"):
        if observation not in ("matrix", "rl2"):
            raise ConfigurationError(f"Unknown matrix observation '{observation}'")
        self.cfg = cfg or MatrixConfig()
        self.observation = observation
        self.default_wave = self.cfg.tasks_per_iteration

    def _observe(self, prev_partner: np.ndarray, prev_main: np.ndarray, prev_reward: np.ndarray, t: int) -> np.ndarray:
        horizon = self.cfg.episode_length
        base = encode_matrix_obs_batch(prev_partner, prev_main, t, horizon)
        if self.observation == "matrix":
            return base
        # previous own action, previous reward, previous partner action, time index
        return np.concatenate(
            [base[:, N_ACTIONS:2 * N_ACTIONS], prev_reward[:, None], base[:, :N_ACTIONS], base[:, -1:]], axis=1
        )

    def run_wave(self, agent, params, tasks, rng, conditioner, compute_values, poison_truth) -> List[_EpisodeBuffer]:
        batch = len(tasks)
        dists = np.stack([task.partner for task in tasks])
        truth = np.stack([task.label for task in tasks])
        if poison_truth:
            truth = np.full_like(truth, np.nan)
        buffers = [_EpisodeBuffer(task.label, task.partner_name) for task in tasks]
        runner = PolicyRunner(agent, params, batch, compute_values)
        conditioner.start(batch)
        prev_partner = np.full(batch, -1)
        prev_main = np.full(batch, -1)
        prev_reward = np.zeros(batch)
        for t in range(self.cfg.episode_length):
            obs = self._observe(prev_partner, prev_main, prev_reward, t)
            conditioning = conditioner.condition(obs, truth)
            actions, log_probs, values = runner.act(obs, conditioning, truth, rng)
            partner_actions = sample_categorical(dists, rng)
            rewards = PAYOFF_MATRIX[partner_actions, actions]
            for i, buffer in enumerate(buffers):
                buffer.append(
                    obs[i], actions[i], rewards[i], values[i], log_probs[i],
                    None if conditioning is None else conditioning[i], t,
                )
            prev_partner, prev_main, prev_reward = partner_actions, actions, rewards
        return buffers


class TsgEnvAdapter:
    """Gridworld episodes with the learner in seat A; self-play also records seat B"""

    def __init__(self, cfg: Optional[TsgConfig] = None, wave_size: int = 50):
        self.cfg = cfg or TsgConfig()
        self.default_wave = wave_size

    def run_wave(self, agent, params, tasks, rng, conditioner, compute_values, poison_truth) -> List[_EpisodeBuffer]:
        cfg = self.cfg
        batch = len(tasks)
        states: List[TsgState] = [tsg_reset(cfg, rng) for _ in tasks]
        truth = np.stack([task.label for task in tasks])
        if poison_truth:
            truth = np.full_like(truth, np.nan)
        buffers = [_EpisodeBuffer(task.label, task.partner_name) for task in tasks]
        self_rows = [i for i, task in enumerate(tasks) if isinstance(task.partner, str) and task.partner == SELF_PLAY]
        mirror_buffers = {i: _EpisodeBuffer(tasks[i].label, SELF_PLAY) for i in self_rows}
        learner = PolicyRunner(agent, params, batch, compute_values)
        mirror = PolicyRunner(agent, params, len(self_rows), compute_values) if self_rows else None
        conditioner.start(batch)

        partner_groups: Dict[int, Tuple[FrozenPolicy, List[int]]] = {}
        for i, task in enumerate(tasks):
            if i not in mirror_buffers:
                partner_groups.setdefault(id(task.partner), (task.partner, []))[1].append(i)

        done = np.zeros(batch, dtype=bool)
        t = 0
        while not done.all():
            obs_a = encode_pairs_batch(states, 0, cfg)
            conditioning = conditioner.condition(obs_a, truth)
            actions_a, log_probs_a, values_a = learner.act(obs_a, conditioning, truth, rng)
            actions_b = np.zeros(batch, dtype=np.int64)
            if mirror is not None:
                obs_b_self = encode_pairs_batch([states[i] for i in self_rows], 1, cfg)
                mirror_actions, mirror_log_probs, mirror_values = mirror.act(
                    obs_b_self, None, truth[self_rows], rng
                )
                actions_b[self_rows] = mirror_actions
            for partner, rows in partner_groups.values():
                obs_b = encode_pairs_batch([states[i] for i in rows], 1, cfg)
                actions_b[rows] = partner.act(obs_b, rng)

            for i in range(batch):
                if done[i]:
                    continue
                states[i], reward, done[i] = tsg_step(states[i], int(actions_a[i]), int(actions_b[i]), cfg)
                buffers[i].append(
                    obs_a[i], actions_a[i], reward, values_a[i], log_probs_a[i],
                    None if conditioning is None else conditioning[i], t,
                )
                if i in mirror_buffers:
                    k = self_rows.index(i)
                    mirror_buffers[i].append(
                        obs_b_self[k], mirror_actions[k], reward, mirror_values[k], mirror_log_probs[k], None, t
                    )
            t += 1
        return buffers + [mirror_buffers[i] for i in self_rows]


def _assemble(buffers: List[_EpisodeBuffer], label_width: int) -> TransitionBatch:
    steps = [buffer for buffer in buffers if len(buffer) > 0]
    if not steps:
        raise ConfigurationError("No transitions collected", code="EMPTY_BATCH")
    total = sum(len(buffer) for buffer in steps)
    episode_ids = np.concatenate([np.full(len(buffer), index) for index, buffer in enumerate(steps)])
    dones = np.zeros(total, dtype=bool)
    dones[np.cumsum([len(buffer) for buffer in steps]) - 1] = True
    conditioned = steps[0].steps["conditioning"][0] is not None
    return TransitionBatch(
        observations=np.stack([obs for buffer in steps for obs in buffer.steps["obs"]]),
        actions=np.array([a for buffer in steps for a in buffer.steps["action"]], dtype=np.int64),
        rewards=np.array([r for buffer in steps for r in buffer.steps["reward"]], dtype=np.float64),
        dones=dones,
        values=np.array([v for buffer in steps for v in buffer.steps["value"]], dtype=np.float64),
        log_probs=np.array([p for buffer in steps for p in buffer.steps["log_prob"]], dtype=np.float64),
        labels=np.stack([buffer.label for buffer in steps for _ in range(len(buffer))]).reshape(total, label_width),
        conditioning=np.stack([c for buffer in steps for c in buffer.steps["conditioning"]]) if conditioned else None,
        episode_ids=episode_ids,
        timesteps=np.array([t for buffer in steps for t in buffer.steps["t"]], dtype=np.int64),
        partners=[buffer.partner_name for buffer in steps],
    )


def collect_rollouts(
    env,
    agent: ActorCritic,
    params: ParamSet,
    partner_source,
    n_steps: int,
    rng: np.random.Generator,
    conditioner: Optional[NoConditioner] = None,
    compute_values: bool = True,
    poison_truth: bool = False,
    wave_size: Optional[int] = None,
) -> TransitionBatch:
    """Collect whole episodes until at least `n_steps` transitions exist"""
    conditioner = conditioner or (TruthConditioner() if agent.conditioned else NoConditioner())
    wave = wave_size or env.default_wave
    buffers: List[_EpisodeBuffer] = []
    collected = 0
    while collected < n_steps:
        tasks = partner_source.sample(wave, rng)
        new_buffers = env.run_wave(agent, params, tasks, rng, conditioner, compute_values, poison_truth)
        buffers.extend(new_buffers)
        collected += sum(len(buffer) for buffer in new_buffers)
    label_width = buffers[0].label.shape[0]
    return _assemble(buffers, label_width)


def collect_episodes(
    env,
    agent: ActorCritic,
    params: ParamSet,
    partner_source,
    n_episodes: int,
    rng: np.random.Generator,
    conditioner: Optional[NoConditioner] = None,
    compute_values: bool = False,
    poison_truth: bool = False,
    wave_size: Optional[int] = None,
) -> TransitionBatch:
    """Exactly `n_episodes` learner episodes; self-play also returns the mirrored seat"""
    if n_episodes <= 0:
        raise ConfigurationError("Episode count must be positive", code="EMPTY_BATCH")
    conditioner = conditioner or (TruthConditioner() if agent.conditioned else NoConditioner())
    wave = wave_size or env.default_wave
    buffers: List[_EpisodeBuffer] = []
    remaining = n_episodes
    while remaining > 0:
        tasks = partner_source.sample(min(wave, remaining), rng)
        buffers.extend(env.run_wave(agent, params, tasks, rng, conditioner, compute_values, poison_truth))
        remaining -= len(tasks)
    return _assemble(buffers, buffers[0].label.shape[0])


def observation_width(env) -> int:
    if isinstance(env, MatrixEnvAdapter):
        return MATRIX_OBS_WIDTH if env.observation == "matrix" else RL2_OBS_WIDTH
    return PAIR_WIDTH
