"""
Generalized advantage estimation and clipped-surrogate PPO over an ActorCritic.

Policy and value networks share one ParamSet (records prefixed `policy.` and
`value.`) and one Adam state, but gradients are clipped per network. The value
network reads the episode's ground-truth label; the policy is rebuilt from the
observation and the conditioning vector it saw while acting.
"""
import csv
import logging
import os
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config import settings
from exceptions import ConfigurationError
from models.agents import ActorCritic
from models.autodiff import Tape, Var
from models.optim import OptState, adam_update, advance_schedule, clip_by_global_norm, init_opt_state
from models.params import ParamSet
from schemas.training_schemas import IterationStats, OptimConfig, PpoHyper
from services.rollout_service import NoConditioner, TransitionBatch, collect_rollouts

logger = logging.getLogger(__name__)

STATS_FIELDS = list(IterationStats.model_fields)


def compute_gae(
    rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, gamma: float, lam: float
) -> Tuple[np.ndarray, np.ndarray]:
    """GAE(lambda) within episodes; terminal steps bootstrap from 0. Returns (advantages, returns)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    advantages = np.zeros_like(rewards)
    running = 0.0
    for t in reversed(range(len(rewards))):
        if dones[t] or t == len(rewards) - 1:
            next_value, running = 0.0, 0.0
        else:
            next_value = values[t + 1]
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
    return advantages, advantages + values


def batch_advantages(batch: TransitionBatch, hyper: PpoHyper) -> Tuple[np.ndarray, np.ndarray]:
    return compute_gae(batch.rewards, batch.values, batch.dones, hyper.gamma, hyper.gae_lambda)


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    mean_ratio: float
    clip_fraction: float


@dataclass
class _LossParts:
    loss: Var
    policy_loss: float
    value_loss: float
    entropy: float
    ratio_sum: float
    clipped: float
    count: float


def _step_terms(
    logits: Var,
    values: Var,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    mask: np.ndarray,
    hyper: PpoHyper,
) -> Tuple[Var, Tuple[float, ...]]:
    """Masked sum of per-step loss terms; padded steps have mask 0 and ratio exp(0)"""
    log_probs = logits.log_softmax()
    chosen = log_probs.take(actions)
    ratio = ((chosen - old_log_probs) * mask).exp()
    surrogate = (ratio * advantages).minimum(ratio.clip(1.0 - hyper.clip_epsilon, 1.0 + hyper.clip_epsilon) * advantages)
    entropy = -(log_probs.exp() * log_probs).sum(axis=-1)
    value_error = (values.reshape(len(actions)) - returns).square()

    policy_term = -(surrogate * mask).sum()
    value_term = (value_error * mask).sum()
    entropy_term = (entropy * mask).sum()
    loss = policy_term + value_term * hyper.value_coef - entropy_term * hyper.entropy_coef

    ratios = ratio.value
    clipped = float(np.sum((np.abs(ratios - 1.0) > hyper.clip_epsilon) * mask))
    floats = (
        float(policy_term.value), float(value_term.value), float(entropy_term.value),
        float(np.sum(ratios * mask)), clipped,
    )
    return loss, floats


def _minibatch_loss_flat(agent, tape, batch, rows, advantages, returns, hyper) -> _LossParts:
    obs = batch.observations[rows]
    conditioning = None if batch.conditioning is None else batch.conditioning[rows]
    x, extra = agent.policy_inputs(obs, conditioning)
    logits = agent.policy.forward(tape, x, None, extra).logits
    vx, vextra = agent.value_inputs(obs, batch.labels[rows])
    values = agent.value.forward(tape, vx, None, vextra).output
    mask = np.ones(len(rows))
    total, floats = _step_terms(
        logits, values, batch.actions[rows], batch.log_probs[rows],
        advantages[rows], returns[rows], mask, hyper,
    )
    count = float(len(rows))
    return _LossParts(total * (1.0 / count), *(value / count for value in floats[:3]), floats[3], floats[4], count)


def _minibatch_loss_sequence(agent, tape, batch, slices, advantages, returns, hyper) -> _LossParts:
    """Unroll whole episodes through time; shorter episodes are padded and masked"""
    horizon = max(stop - start for start, stop in slices)
    n_episodes = len(slices)
    policy_state, value_state = agent.initial_states(n_episodes)
    total: Optional[Var] = None
    sums = np.zeros(5)
    for t in range(horizon):
        rows = np.array([start + t if start + t < stop else start for start, stop in slices])
        mask = np.array([1.0 if start + t < stop else 0.0 for start, stop in slices])
        obs = batch.observations[rows]
        conditioning = None if batch.conditioning is None else batch.conditioning[rows]
        x, extra = agent.policy_inputs(obs, conditioning)
        policy_out = agent.policy.forward(tape, x, policy_state, extra)
        vx, vextra = agent.value_inputs(obs, batch.labels[rows])
        value_out = agent.value.forward(tape, vx, value_state, vextra)
        policy_state, value_state = policy_out.state, value_out.state
        term, floats = _step_terms(
            policy_out.logits, value_out.output, batch.actions[rows], batch.log_probs[rows],
            advantages[rows], returns[rows], mask, hyper,
        )
        total = term if total is None else total + term
        sums += floats
    count = float(sum(stop - start for start, stop in slices))
    return _LossParts(total * (1.0 / count), sums[0] / count, sums[1] / count, sums[2] / count, sums[3], sums[4], count)


def _clip_per_network(grads: ParamSet, max_norm: Optional[float]) -> ParamSet:
    clipped = OrderedDict()
    for prefix in ("policy", "value"):
        part, _ = clip_by_global_norm(grads.subset(prefix), max_norm)
        clipped.update(part.records)
    leftover = [name for name in grads if name not in clipped]
    if leftover:
        raise ConfigurationError("Gradient records outside the policy and value networks", details={"records": leftover})
    return ParamSet(OrderedDict((name, clipped[name]) for name in grads), grads.version)


def _episode_minibatches(batch: TransitionBatch, hyper: PpoHyper, rng: np.random.Generator) -> Iterable[List[Tuple[int, int]]]:
    slices = batch.episode_slices()
    per_batch = max(1, int(round(hyper.minibatch_size / max(1.0, len(batch) / len(slices)))))
    order = rng.permutation(len(slices))
    for start in range(0, len(order), per_batch):
        yield [slices[i] for i in order[start:start + per_batch]]


def ppo_update(
    agent: ActorCritic,
    params: ParamSet,
    opt: OptState,
    batch: TransitionBatch,
    hyper: PpoHyper,
    rng: np.random.Generator,
) -> Tuple[ParamSet, OptState, UpdateStats]:
    """`epochs` passes of shuffled minibatches; returns new parameters, optimizer state and averaged stats"""
    if len(batch) == 0:
        raise ConfigurationError("Cannot update on an empty batch", code="EMPTY_BATCH")
    advantages, returns = batch_advantages(batch, hyper)
    if hyper.normalize_advantages:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    totals = np.zeros(5)
    steps = 0.0
    for _ in range(hyper.epochs):
        if agent.recurrent:
            groups = [("sequence", group) for group in _episode_minibatches(batch, hyper, rng)]
        else:
            order = rng.permutation(len(batch))
            groups = [
                ("flat", order[start:start + hyper.minibatch_size])
                for start in range(0, len(order), hyper.minibatch_size)
            ]
        for mode, group in groups:
            tape = Tape(params)
            if mode == "flat":
                parts = _minibatch_loss_flat(agent, tape, batch, group, advantages, returns, hyper)
            else:
                parts = _minibatch_loss_sequence(agent, tape, batch, group, advantages, returns, hyper)
            grads = _clip_per_network(tape.backward(parts.loss), hyper.max_grad_norm)
            params, opt = adam_update(params, grads, opt)
            totals += np.array([
                parts.policy_loss * parts.count, parts.value_loss * parts.count, parts.entropy * parts.count,
                parts.ratio_sum, parts.clipped,
            ])
            steps += parts.count
    stats = UpdateStats(
        policy_loss=float(totals[0] / steps),
        value_loss=float(totals[1] / steps),
        entropy=float(totals[2] / steps),
        mean_ratio=float(totals[3] / steps),
        clip_fraction=float(min(1.0, totals[4] / steps)),
    )
    return params, opt, stats


def write_stats_csv(rows: Iterable[IterationStats], path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=STATS_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: repr(value) if isinstance(value, float) else value for key, value in row.model_dump().items()})
    return path


def read_stats_csv(path: str) -> List[IterationStats]:
    with open(path, newline="", encoding="utf-8") as handle:
        return [IterationStats(**row) for row in csv.DictReader(handle)]


class PpoTrainer:
    """
    Iterates collect -> update for one agent. The learning-rate schedule spans
    `total_iterations`, so several training segments can share one trainer.
    """

    def __init__(
        self,
        agent: ActorCritic,
        env,
        hyper: PpoHyper,
        rng: np.random.Generator,
        total_iterations: int,
        optim: Optional[OptimConfig] = None,
        params: Optional[ParamSet] = None,
        log_interval: int = 50,
        label: str = "",
    ):
        self.agent = agent
        self.env = env
        self.hyper = hyper
        self.rng = rng
        self.params = params if params is not None else agent.init_params(rng)
        self.opt = init_opt_state(self.params, optim, total_iterations)
        self.iteration = 0
        self.history: List[IterationStats] = []
        self.log_interval = log_interval
        self.label = label or agent.kind

    def step(self, partner_source, conditioner: Optional[NoConditioner] = None) -> IterationStats:
        batch = collect_rollouts(
            self.env, self.agent, self.params, partner_source, self.hyper.batch_steps, self.rng, conditioner
        )
        advance_schedule(self.opt, self.iteration)
        self.params, self.opt, update = ppo_update(self.agent, self.params, self.opt, batch, self.hyper, self.rng)
        stats = IterationStats(
            iteration=self.iteration,
            mean_return=float(batch.episode_returns().mean()),
            mean_length=float(batch.episode_lengths().mean()),
            policy_loss=update.policy_loss,
            value_loss=update.value_loss,
            clip_fraction=update.clip_fraction,
            entropy=update.entropy,
        )
        self.history.append(stats)
        if self.log_interval and self.iteration % self.log_interval == 0:
            logger.info(
                "%s iteration %d: return %.4f length %.2f policy_loss %.4f value_loss %.5f",
                self.label, stats.iteration, stats.mean_return, stats.mean_length,
                stats.policy_loss, stats.value_loss,
            )
        self.iteration += 1
        return stats

    def train(
        self,
        partner_source,
        iterations: int,
        conditioner: Optional[NoConditioner] = None,
        on_iteration: Optional[Callable[[int, ParamSet], None]] = None,
    ) -> List[IterationStats]:
        """Run `iterations` updates; `on_iteration(i, params)` fires before each one, with i counted from 0"""
        rows = []
        progress = tqdm(range(iterations), desc=self.label, disable=not settings.SHOW_PROGRESS, leave=False)
        for _ in progress:
            if on_iteration is not None:
                on_iteration(self.iteration, self.params)
            rows.append(self.step(partner_source, conditioner))
        return rows
