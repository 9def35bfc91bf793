import logging
import os

import numpy as np

from commands import add_config_argument, add_seed_argument, experiment_config, with_overrides
from exceptions import UsageError
from services.baseline_service import train_lstm_policy, train_rl2
from services.ppo_service import write_stats_csv
from storage import save_params

logger = logging.getLogger(__name__)


def train_baseline(args) -> None:
    env = "matrix" if args.which == "rl2" else "tsg"
    config = experiment_config(args.config, env)
    rng = np.random.default_rng(args.seed)
    if args.which == "rl2":
        alpha = args.alpha if args.alpha is not None else config.matrix.alphas[0]
        params, history = train_rl2(
            config.matrix.matrix_config(alpha), config.matrix_hyper(), args.iterations or config.matrix.iterations,
            rng, config.optim,
        )
    else:
        if not args.pop:
            raise UsageError("--pop is required for the LSTM baseline", code="MISSING_ARGUMENT")
        schedule = with_overrides(
            config.tsg.population_config(config.tsg_hyper(), config.optim),
            clone_iterations=args.clone_iterations,
            coop_iterations=args.coop_iterations,
        )
        params, history = train_lstm_policy(args.pop, schedule, rng, os.path.dirname(os.path.abspath(args.out)))
    save_params(params, args.out)
    write_stats_csv(history, os.path.splitext(args.out)[0] + "_stats.csv")


def register(subparsers) -> None:
    parser = subparsers.add_parser("train-baseline", help="Train the RL² or LSTM baseline")
    parser.add_argument("--which", choices=["rl2", "lstm"], required=True)
    parser.add_argument("--alpha", type=float, help="Dirichlet concentration (RL²)")
    parser.add_argument("--pop", help="Population directory (LSTM)")
    parser.add_argument("--iterations", type=int, help="Training iterations (RL²)")
    parser.add_argument("--clone-iterations", type=int)
    parser.add_argument("--coop-iterations", type=int)
    parser.add_argument("--out", required=True, help="Checkpoint file")
    add_seed_argument(parser)
    add_config_argument(parser)
    parser.set_defaults(handler=train_baseline)
