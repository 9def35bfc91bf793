import json
import logging
import os

import numpy as np

from commands import add_config_argument, add_seed_argument, experiment_config, with_overrides
from exceptions import UsageError
from models.agents import matrix_conditioned_agent, tsg_conditioned_agent
from models.layers import Network
from models.networks import matrix_predictor_spec, skill_predictor_spec
from schemas.training_schemas import PredictorConfig
from services.behaviour_service import (
    matrix_predictor_dataset,
    skill_predictor_dataset,
    train_matrix_bc_policy,
    train_matrix_predictor,
    train_skill_predictor,
    train_tsg_bc_policy,
)
from services.evaluation_service import PolicyBundle, partner_source, run_bundle, summarize_batch
from services.ppo_service import write_stats_csv
from services.rollout_service import MatrixEnvAdapter, TsgEnvAdapter
from storage import load_params, save_params

logger = logging.getLogger(__name__)


def _alpha(args, config) -> float:
    return args.alpha if args.alpha is not None else config.matrix.alphas[0]


def _require_population(args) -> str:
    if not args.pop:
        raise UsageError("--pop is required for the gridworld", code="MISSING_ARGUMENT")
    return args.pop


def train_pred(args) -> None:
    config = experiment_config(args.config, args.env)
    rng = np.random.default_rng(args.seed)
    if args.env == "matrix":
        alpha = _alpha(args, config)
        predictor_config = PredictorConfig(
            iterations=args.iterations or config.matrix.predictor_iterations,
            batch_episodes=config.matrix.predictor_episodes,
            dataset_episodes=config.matrix.predictor_dataset,
            optim=config.optim,
        )
        data = matrix_predictor_dataset(alpha, predictor_config.dataset_episodes, rng, config.matrix.matrix_config(alpha))
        params, history = train_matrix_predictor(data, predictor_config, rng)
    else:
        predictor_config = PredictorConfig(
            iterations=args.iterations or config.tsg.predictor_iterations,
            batch_episodes=config.tsg.predictor_episodes,
            dataset_episodes=config.tsg.predictor_dataset,
            optim=config.optim,
        )
        data = skill_predictor_dataset(_require_population(args), predictor_config.dataset_episodes, rng)
        params, history = train_skill_predictor(data, predictor_config, rng, config.tsg.net_config())
    save_params(params, args.out)
    print(f"{args.out}: final loss {history[-1].loss:.5f}, final-step accuracy {history[-1].final_step_accuracy:.3f}")


def train_bc(args) -> None:
    config = experiment_config(args.config, args.env)
    rng = np.random.default_rng(args.seed)
    if args.env == "matrix":
        alpha = _alpha(args, config)
        params, history = train_matrix_bc_policy(
            config.matrix.matrix_config(alpha), config.matrix_hyper(), args.iterations or config.matrix.iterations,
            rng, config.optim,
        )
    else:
        schedule = with_overrides(
            config.tsg.population_config(config.tsg_hyper(), config.optim),
            clone_iterations=args.clone_iterations,
            coop_iterations=args.coop_iterations,
        )
        params, history = train_tsg_bc_policy(
            _require_population(args), schedule, rng, os.path.dirname(os.path.abspath(args.out))
        )
    save_params(params, args.out)
    write_stats_csv(history, os.path.splitext(args.out)[0] + "_stats.csv")


def execute(args) -> None:
    config = experiment_config(args.config, args.env)
    rng = np.random.default_rng(args.seed)
    if args.env == "matrix":
        env = MatrixEnvAdapter(config.matrix.matrix_config(config.matrix.alphas[0]))
        agent, predictor = matrix_conditioned_agent(), Network(matrix_predictor_spec())
    else:
        env = TsgEnvAdapter(config.tsg.tsg_config(), config.tsg.wave_size)
        net = config.tsg.net_config()
        agent, predictor = tsg_conditioned_agent(net), Network(skill_predictor_spec(net))
    bundle = PolicyBundle(
        "bc", args.seed, agent, load_params(args.policy), env, predictor, load_params(args.predictor),
        population_seed=args.population_seed,
    )
    source = partner_source(args.partner, args.reference, args.population_seed)
    batch = run_bundle(bundle, source, args.episodes, rng)
    print(json.dumps(summarize_batch("bc", args.seed, args.partner, batch).model_dump(), indent=2))


def _common(parser, with_alpha: bool = True) -> None:
    parser.add_argument("--env", choices=["matrix", "tsg"], required=True)
    if with_alpha:
        parser.add_argument("--alpha", type=float, help="Dirichlet concentration (matrix game)")
    add_seed_argument(parser)
    add_config_argument(parser)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train-pred", help="Train a task-prediction network")
    _common(parser)
    parser.add_argument("--pop", help="Population directory (gridworld)")
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--out", required=True, help="Checkpoint file")
    parser.set_defaults(handler=train_pred)

    parser = subparsers.add_parser("train-bc", help="Train a behaviour-conditioned policy on ground-truth labels")
    _common(parser)
    parser.add_argument("--pop", help="Population directory (gridworld)")
    parser.add_argument("--iterations", type=int, help="Training iterations (matrix game)")
    parser.add_argument("--clone-iterations", type=int)
    parser.add_argument("--coop-iterations", type=int)
    parser.add_argument("--out", required=True, help="Checkpoint file")
    parser.set_defaults(handler=train_bc)

    parser = subparsers.add_parser("exec", help="Run a conditioned policy with predicted labels")
    _common(parser, with_alpha=False)
    parser.add_argument("--policy", required=True)
    parser.add_argument("--predictor", required=True)
    parser.add_argument("--partner", required=True, help="skilled, intermediate, novice or dist:<alpha>")
    parser.add_argument("--reference", help="Reference population directory for skill partners")
    parser.add_argument("--population-seed", type=int, help="Seed of the population the policy trained with")
    parser.add_argument("--episodes", type=int, default=100)
    parser.set_defaults(handler=execute)
