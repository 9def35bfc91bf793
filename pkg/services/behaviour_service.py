"""
Task prediction and behaviour-conditioned policies.

Training conditions the policy on the ground-truth label of each episode. Execution
replaces that label with the running output of a recurrent predictor, so nothing on
the execution path reads the truth.
"""
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config import settings
from envs.dirichlet import sample_dirichlet
from envs.matrix import N_ACTIONS, encode_matrix_obs_batch
from exceptions import ConfigurationError
from models.agents import ActorCritic, matrix_conditioned_agent, tsg_conditioned_agent, tsg_self_play_agent
from models.autodiff import Tape, Var
from models.layers import Network
from models.networks import matrix_predictor_spec, skill_predictor_spec
from models.optim import adam_update, advance_schedule, init_opt_state
from models.params import ParamSet
from schemas.env_schemas import MatrixConfig
from schemas.label_schemas import SkillLevel
from schemas.network_schemas import TsgNetConfig
from schemas.population_schemas import PopulationConfig
from schemas.training_schemas import IterationStats, OptimConfig, PpoHyper, PredictorConfig, PredictorStats
from services.population_service import labelled_pool, load_population, load_snapshot, skill_partners
from services.ppo_service import PpoTrainer
from services.rollout_service import (
    DirichletPartners,
    LabelledPartners,
    MatrixEnvAdapter,
    PredictorConditioner,
    TransitionBatch,
    TsgEnvAdapter,
    collect_episodes,
    sample_categorical,
)
from storage import save_opt_state, save_params

logger = logging.getLogger(__name__)

LABEL_KINDS = ("distribution", "skill")


@dataclass
class PredictorDataset:
    """Episode-aligned observation sequences, padded to a common horizon, one label per episode"""
    observations: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise ConfigurationError(f"Unknown label kind '{self.kind}'")
        n = self.observations.shape[0]
        if self.lengths.shape != (n,) or self.labels.shape[0] != n:
            raise ConfigurationError("Dataset arrays disagree on the episode count", code="SHAPE_MISMATCH")
        if np.any(self.lengths < 1) or np.any(self.lengths > self.observations.shape[1]):
            raise ConfigurationError("Episode lengths out of range", code="SHAPE_MISMATCH")
        if not np.all(np.isfinite(self.labels)) or np.any(self.labels < 0.0):
            raise ConfigurationError("Labels must be finite and non-negative")
        if np.any(np.abs(self.labels.sum(axis=1) - 1.0) > 1e-9):
            raise ConfigurationError("Labels must lie on the simplex")
        if self.kind == "skill" and np.any(self.labels.max(axis=1) != 1.0):
            raise ConfigurationError("Ground-truth skill labels must be one-hot")

    def __len__(self) -> int:
        return int(self.observations.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.observations.shape[1])

    def subset(self, rows: Sequence[int]) -> "PredictorDataset":
        rows = np.asarray(rows)
        horizon = int(self.lengths[rows].max())
        return PredictorDataset(
            self.observations[rows, :horizon], self.lengths[rows], self.labels[rows], self.kind
        )

    @classmethod
    def from_batch(cls, batch: TransitionBatch, kind: str) -> "PredictorDataset":
        slices = batch.episode_slices()
        horizon = max(stop - start for start, stop in slices)
        observations = np.zeros((len(slices), horizon) + batch.observations.shape[1:])
        for index, (start, stop) in enumerate(slices):
            observations[index, : stop - start] = batch.observations[start:stop]
        lengths = np.array([stop - start for start, stop in slices])
        labels = np.stack([batch.labels[start] for start, _ in slices])
        return cls(observations, lengths, labels, kind)


# datasets

def matrix_predictor_dataset(
    alpha: float, n_episodes: int, rng: np.random.Generator, cfg: Optional[MatrixConfig] = None
) -> PredictorDataset:
    """Matrix-game trajectories with a uniformly random main agent"""
    cfg = cfg or MatrixConfig(alpha=alpha)
    horizon = cfg.episode_length
    dists = np.stack([sample_dirichlet(alpha, N_ACTIONS, rng) for _ in range(n_episodes)])
    observations = np.zeros((n_episodes, horizon, 2 * N_ACTIONS + 1))
    prev_partner = np.full(n_episodes, -1)
    prev_main = np.full(n_episodes, -1)
    for t in range(horizon):
        observations[:, t] = encode_matrix_obs_batch(prev_partner, prev_main, t, horizon)
        prev_partner = sample_categorical(dists, rng)
        prev_main = rng.integers(N_ACTIONS, size=n_episodes)
    return PredictorDataset(observations, np.full(n_episodes, horizon), dists, "distribution")


def skill_predictor_dataset(population_dir: str, n_episodes: int, rng: np.random.Generator) -> PredictorDataset:
    """The population's skilled snapshot in the main seat, partnered across all three skill levels"""
    manifest = load_population(population_dir)
    skilled = load_snapshot(population_dir, manifest.skill_snapshot(SkillLevel.SKILLED))
    agent = tsg_self_play_agent(manifest.config.net)
    env = TsgEnvAdapter(manifest.config.tsg, manifest.config.wave_size)
    partners = LabelledPartners(skill_partners(population_dir, manifest))
    batch = collect_episodes(env, agent, skilled.params, partners, n_episodes, rng)
    return PredictorDataset.from_batch(batch, "skill")


# predictor training

def _sequence_loss(network: Network, tape: Tape, data: PredictorDataset, loss_kind: str) -> Tuple[Var, float]:
    """Per-step loss against the episode label, averaged over valid steps; also final-step accuracy"""
    state = network.initial_state(len(data))
    total: Optional[Var] = None
    correct = 0.0
    targets = np.argmax(data.labels, axis=1)
    for t in range(data.horizon):
        mask = (data.lengths > t).astype(np.float64)
        result = network.forward(tape, data.observations[:, t], state)
        state = result.state
        if loss_kind == "mse":
            per_step = (result.output - data.labels).square().sum(axis=-1)
        else:
            per_step = -(result.logits.log_softmax() * data.labels).sum(axis=-1)
        term = (per_step * mask).sum()
        total = term if total is None else total + term
        final = data.lengths == t + 1
        correct += float(np.sum(np.argmax(result.output.value, axis=1)[final] == targets[final]))
    return total * (1.0 / float(data.lengths.sum())), correct / len(data)


def _train_predictor(
    network: Network, data: PredictorDataset, loss_kind: str, config: PredictorConfig, rng: np.random.Generator
) -> Tuple[ParamSet, List[PredictorStats]]:
    params = network.init_params(rng)
    opt = init_opt_state(params, config.optim, config.iterations)
    history: List[PredictorStats] = []
    progress = tqdm(range(config.iterations), desc=network.name, disable=not settings.SHOW_PROGRESS, leave=False)
    for iteration in progress:
        rows = rng.choice(len(data), size=min(config.batch_episodes, len(data)), replace=False)
        tape = Tape(params)
        loss, accuracy = _sequence_loss(network, tape, data.subset(rows), loss_kind)
        grads = tape.backward(loss)
        advance_schedule(opt, iteration)
        params, opt = adam_update(params, grads, opt)
        history.append(PredictorStats(iteration=iteration, loss=float(loss.value), final_step_accuracy=accuracy))
        if config.log_interval and iteration % config.log_interval == 0:
            logger.info("%s iteration %d: loss %.5f final-step accuracy %.3f", network.name, iteration, loss.value, accuracy)
    return params, history


def train_matrix_predictor(
    data: PredictorDataset, config: PredictorConfig, rng: np.random.Generator
) -> Tuple[ParamSet, List[PredictorStats]]:
    """Recurrent predictor of the partner's action distribution, squared-error loss"""
    if data.kind != "distribution":
        raise ConfigurationError("The matrix predictor needs distribution labels", code="WRONG_LABEL")
    return _train_predictor(Network(matrix_predictor_spec()), data, "mse", config, rng)


def train_skill_predictor(
    data: PredictorDataset, config: PredictorConfig, rng: np.random.Generator, net: Optional[TsgNetConfig] = None
) -> Tuple[ParamSet, List[PredictorStats]]:
    """Relation-net plus LSTM classifier of the partner's skill level, cross-entropy loss"""
    if data.kind != "skill":
        raise ConfigurationError("The skill predictor needs skill labels", code="WRONG_LABEL")
    return _train_predictor(Network(skill_predictor_spec(net)), data, "xe", config, rng)


def predict_sequences(network: Network, params: ParamSet, data: PredictorDataset) -> np.ndarray:
    """Predictor output at every step, shape (episodes, horizon, classes)"""
    state = network.initial_state(len(data))
    outputs = []
    for t in range(data.horizon):
        output, state = network.predict(params, data.observations[:, t], state)
        outputs.append(output)
    return np.stack(outputs, axis=1)


def step_accuracy(outputs: np.ndarray, data: PredictorDataset) -> List[Tuple[int, float, int]]:
    """(t, accuracy, episodes still running at t) for every step of the horizon"""
    targets = np.argmax(data.labels, axis=1)
    rows = []
    for t in range(data.horizon):
        alive = data.lengths > t
        n = int(alive.sum())
        hits = np.argmax(outputs[alive, t], axis=1) == targets[alive]
        rows.append((t, float(hits.mean()) if n else 0.0, n))
    return rows


# behaviour-conditioned policies

def train_matrix_bc_policy(
    cfg: MatrixConfig,
    hyper: PpoHyper,
    iterations: int,
    rng: np.random.Generator,
    optim: Optional[OptimConfig] = None,
) -> Tuple[ParamSet, List[IterationStats]]:
    """Feedforward policy conditioned on the true partner distribution, fresh Dir(alpha) tasks each iteration"""
    trainer = PpoTrainer(
        matrix_conditioned_agent(), MatrixEnvAdapter(cfg), hyper, rng, iterations, optim, label=f"bc[{cfg.alpha:g}]"
    )
    trainer.train(DirichletPartners(cfg.alpha), iterations)
    return trainer.params, trainer.history


def train_against_population(
    agent: ActorCritic,
    population_dir: str,
    schedule: PopulationConfig,
    rng: np.random.Generator,
    checkpoint_dir: Optional[str] = None,
) -> Tuple[ParamSet, List[IterationStats]]:
    """
    Gridworld training with a labelled population partner in the other seat: first
    against the three selected skill snapshots, then against every snapshot labelled
    by its nearest skill level.
    """
    manifest = load_population(population_dir)
    env = TsgEnvAdapter(schedule.tsg, schedule.wave_size)
    trainer = PpoTrainer(
        agent, env, schedule.hyper, rng, max(1, schedule.total_iterations), schedule.optim, label=agent.kind
    )
    trainer.train(LabelledPartners(skill_partners(population_dir, manifest)), schedule.clone_iterations)
    if checkpoint_dir:
        save_params(trainer.params, os.path.join(checkpoint_dir, f"{agent.kind}_clone.bcpm"))
        save_opt_state(trainer.opt, os.path.join(checkpoint_dir, f"{agent.kind}_clone.bcpo"))
    if schedule.coop_iterations:
        trainer.train(LabelledPartners(labelled_pool(population_dir, manifest)), schedule.coop_iterations)
    return trainer.params, trainer.history


def train_tsg_bc_policy(
    population_dir: str, schedule: PopulationConfig, rng: np.random.Generator, checkpoint_dir: Optional[str] = None
) -> Tuple[ParamSet, List[IterationStats]]:
    return train_against_population(tsg_conditioned_agent(schedule.net), population_dir, schedule, rng, checkpoint_dir)


def execute_conditioned(
    agent: ActorCritic,
    policy_params: ParamSet,
    predictor: Network,
    predictor_params: ParamSet,
    env,
    partners,
    n_episodes: int,
    rng: np.random.Generator,
    poison_truth: bool = False,
) -> TransitionBatch:
    """
    Decentralized execution: each step the predictor reads the observation and its
    output conditions the policy. `batch.conditioning` holds those predictions.
    """
    if not agent.conditioned:
        raise ConfigurationError(f"Agent '{agent.kind}' is not behaviour-conditioned")
    conditioner = PredictorConditioner(predictor, predictor_params)
    return collect_episodes(
        env, agent, policy_params, partners, n_episodes, rng,
        conditioner=conditioner, compute_values=False, poison_truth=poison_truth,
    )
