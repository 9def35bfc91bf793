"""
Evaluation protocols: trained agents against fresh partners, and the planner and
best-response oracles that anchor the reports.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config import settings
from envs.dirichlet import sample_dirichlet
from envs.matrix import N_ACTIONS, best_response
from envs.oracles import format_layout_line, joint_optimal_plan, optimal_return, solo_optimal_plan
from envs.tsg import tsg_reset
from exceptions import ConfigurationError
from models.agents import ActorCritic
from models.layers import Network
from models.networks import tsg_policy_spec
from models.params import ParamSet
from schemas.env_schemas import MatrixConfig, TsgConfig
from schemas.experiment_schemas import EvalRow
from schemas.label_schemas import SkillLevel
from services.behaviour_service import execute_conditioned
from services.baseline_service import execute_baseline
from services.population_service import load_population, load_snapshot
from services.rollout_service import DirichletPartners, FrozenPolicy, LabelledPartners, TransitionBatch

logger = logging.getLogger(__name__)

DIST_PREFIX = "dist:"


@dataclass
class PolicyBundle:
    """Everything needed to act: the agent, its parameters and, for conditioned agents, the predictor"""
    experiment: str
    seed: int
    agent: ActorCritic
    params: ParamSet
    env: object
    predictor: Optional[Network] = None
    predictor_params: Optional[ParamSet] = None
    population_seed: Optional[int] = None


def summarize(
    experiment: str, seed: int, partner: str, lengths: Sequence[float], returns: Sequence[float], last_rewards: Sequence[float]
) -> EvalRow:
    lengths = np.asarray(lengths, dtype=np.float64)
    returns = np.asarray(returns, dtype=np.float64)
    return EvalRow(
        experiment=experiment,
        seed=seed,
        partner=partner,
        n_episodes=len(lengths),
        mean_length=float(lengths.mean()),
        std_length=float(lengths.std()),
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        mean_last_step_reward=float(np.mean(last_rewards)),
    )


def summarize_batch(experiment: str, seed: int, partner: str, batch: TransitionBatch) -> EvalRow:
    return summarize(
        experiment, seed, partner, batch.episode_lengths(), batch.episode_returns(), batch.last_step_rewards()
    )


def parse_alpha(partner: str) -> float:
    try:
        alpha = float(partner[len(DIST_PREFIX):])
    except ValueError:
        raise ConfigurationError(f"Bad partner '{partner}', expected dist:<alpha>", code="BAD_PARTNER") from None
    if not alpha > 0.0:
        raise ConfigurationError(f"Concentration must be positive in '{partner}'", code="BAD_PARTNER")
    return alpha


def reference_partner(reference_dir: str, level: SkillLevel, population_seed: Optional[int]) -> LabelledPartners:
    """One skill level of the held-out reference population; refuses the bundle's own training population"""
    manifest = load_population(reference_dir)
    if population_seed is not None and manifest.seed == population_seed:
        raise ConfigurationError(
            f"Reference population seed {manifest.seed} was used for training",
            code="PARTNER_OVERLAP",
            details={"seed": manifest.seed},
        )
    snapshot = load_snapshot(reference_dir, manifest.skill_snapshot(level))
    policy = FrozenPolicy(Network(tsg_policy_spec(manifest.config.net)), snapshot.params, level.value)
    return LabelledPartners([(policy, level.one_hot())])


def partner_source(partner: str, reference_dir: Optional[str] = None, population_seed: Optional[int] = None):
    if partner.startswith(DIST_PREFIX):
        return DirichletPartners(parse_alpha(partner))
    try:
        level = SkillLevel(partner)
    except ValueError:
        raise ConfigurationError(
            f"Unknown partner '{partner}'",
            code="BAD_PARTNER",
            details={"known": [level.value for level in SkillLevel] + ["dist:<alpha>"]},
        ) from None
    if reference_dir is None:
        raise ConfigurationError("Skill partners need a reference population", code="MISSING_REFERENCE")
    return reference_partner(reference_dir, level, population_seed)


def run_bundle(bundle: PolicyBundle, partners, n_episodes: int, rng: np.random.Generator, poison_truth: bool = False) -> TransitionBatch:
    if bundle.agent.conditioned:
        if bundle.predictor is None or bundle.predictor_params is None:
            raise ConfigurationError(f"'{bundle.experiment}' needs a predictor to execute", code="MISSING_PREDICTOR")
        return execute_conditioned(
            bundle.agent, bundle.params, bundle.predictor, bundle.predictor_params,
            bundle.env, partners, n_episodes, rng, poison_truth,
        )
    return execute_baseline(bundle.agent, bundle.params, bundle.env, partners, n_episodes, rng, poison_truth)


def evaluate(
    bundle: PolicyBundle,
    partners: Sequence[str],
    n_episodes: int,
    rng: np.random.Generator,
    reference_dir: Optional[str] = None,
) -> List[EvalRow]:
    """One row per partner type, each over fresh episodes"""
    rows = []
    for partner in partners:
        source = partner_source(partner, reference_dir, bundle.population_seed)
        batch = run_bundle(bundle, source, n_episodes, rng)
        row = summarize_batch(bundle.experiment, bundle.seed, partner, batch)
        logger.info("%s seed %d vs %s: length %.2f return %.4f last-step %.4f",
                    bundle.experiment, bundle.seed, partner, row.mean_length, row.mean_return, row.mean_last_step_reward)
        rows.append(row)
    return rows


def planner_lengths(
    n_layouts: int, cfg: TsgConfig, rng: np.random.Generator, dump: Optional[List[str]] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Joint and solo optimal lengths over random layouts; `dump` collects one layout line each"""
    joint, solo = np.zeros(n_layouts), np.zeros(n_layouts)
    for i in tqdm(range(n_layouts), desc="oracle", disable=not settings.SHOW_PROGRESS, leave=False):
        state = tsg_reset(cfg, rng)
        joint[i] = joint_optimal_plan(state)
        solo[i] = solo_optimal_plan(state)
        if dump is not None:
            dump.append(format_layout_line(state, int(joint[i]), int(solo[i])))
    return joint, solo


def oracle_rows(
    n_layouts: int, cfg: TsgConfig, rng: np.random.Generator, seed: int = 0, dump: Optional[List[str]] = None
) -> List[EvalRow]:
    """
    Planner rows: `skilled` is the joint plan, `novice` one agent collecting everything.
    The last step of an optimal episode is the final pickup.
    """
    joint, solo = planner_lengths(n_layouts, cfg, rng, dump)
    last = cfg.step_reward + cfg.goal_reward
    rows = []
    for partner, lengths in (("skilled", joint), ("novice", solo)):
        returns = [optimal_return(length, cfg) for length in lengths]
        rows.append(summarize("optimal", seed, partner, lengths, returns, np.full(n_layouts, last)))
    return rows


def matrix_oracle_row(alpha: float, n_samples: int, rng: np.random.Generator, cfg: Optional[MatrixConfig] = None, seed: int = 0) -> EvalRow:
    """Best response with the partner distribution known from the first step"""
    cfg = cfg or MatrixConfig(alpha=alpha)
    values = np.array([best_response(sample_dirichlet(alpha, N_ACTIONS, rng))[1] for _ in range(n_samples)])
    lengths = np.full(n_samples, float(cfg.episode_length))
    return summarize("oracle", seed, f"{DIST_PREFIX}{alpha:g}", lengths, values * cfg.episode_length, values)
