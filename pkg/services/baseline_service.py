"""
Comparison systems: an RL² recurrent learner for the matrix game and an end-to-end
LSTM policy for the gridworld. Both train with a centralized critic and act from
their own observations alone.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError
from models.agents import ActorCritic, rl2_agent, tsg_lstm_agent
from models.params import ParamSet
from schemas.env_schemas import MatrixConfig
from schemas.population_schemas import PopulationConfig
from schemas.training_schemas import IterationStats, OptimConfig, PpoHyper
from services.behaviour_service import train_against_population
from services.ppo_service import PpoTrainer
from services.rollout_service import DirichletPartners, MatrixEnvAdapter, NoConditioner, TransitionBatch, collect_episodes

logger = logging.getLogger(__name__)


def train_rl2(
    cfg: MatrixConfig,
    hyper: PpoHyper,
    iterations: int,
    rng: np.random.Generator,
    optim: Optional[OptimConfig] = None,
) -> Tuple[ParamSet, List[IterationStats]]:
    """Recurrent policy over (previous own action, reward, partner action, time); state resets every episode"""
    trainer = PpoTrainer(
        rl2_agent(), MatrixEnvAdapter(cfg, observation="rl2"), hyper, rng, iterations, optim,
        label=f"rl2[{cfg.alpha:g}]",
    )
    trainer.train(DirichletPartners(cfg.alpha), iterations)
    return trainer.params, trainer.history


def train_lstm_policy(
    population_dir: str, schedule: PopulationConfig, rng: np.random.Generator, checkpoint_dir: Optional[str] = None
) -> Tuple[ParamSet, List[IterationStats]]:
    """Relation net, LSTM and softmax, trained on the same partner schedule as the conditioned policy"""
    return train_against_population(tsg_lstm_agent(schedule.net), population_dir, schedule, rng, checkpoint_dir)


def execute_baseline(
    agent: ActorCritic,
    params: ParamSet,
    env,
    partners,
    n_episodes: int,
    rng: np.random.Generator,
    poison_truth: bool = False,
) -> TransitionBatch:
    if agent.conditioned:
        raise ConfigurationError(f"Agent '{agent.kind}' needs a predictor to execute")
    return collect_episodes(
        env, agent, params, partners, n_episodes, rng,
        conditioner=NoConditioner(), compute_values=False, poison_truth=poison_truth,
    )
