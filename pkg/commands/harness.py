import logging
import os

import numpy as np

from commands import add_config_argument, add_seed_argument, experiment_config
from config import settings
from envs.oracles import write_layout_dump
from exceptions import UsageError
from models.agents import build_agent
from models.layers import Network
from models.networks import matrix_predictor_spec, skill_predictor_spec
from schemas.experiment_schemas import load_experiment_config
from services.evaluation_service import PolicyBundle, evaluate, oracle_rows
from services.experiment_service import run_experiment
from services.report_service import emit_report, read_results, write_results
from services.rollout_service import MatrixEnvAdapter, TsgEnvAdapter
from storage import load_params

logger = logging.getLogger(__name__)

AGENT_KINDS = {
    ("matrix", "bc"): "matrix_bc",
    ("matrix", "rl2"): "rl2",
    ("tsg", "bc"): "tsg_bc",
    ("tsg", "lstm"): "tsg_lstm",
}


def eval_command(args) -> None:
    config = experiment_config(args.config, args.env)
    kind = AGENT_KINDS.get((args.env, args.kind))
    if kind is None:
        raise UsageError(f"No '{args.kind}' agent for the {args.env} environment", code="BAD_KIND")
    net = config.tsg.net_config()
    agent = build_agent(kind, net)
    if args.env == "matrix":
        env = MatrixEnvAdapter(config.matrix.matrix_config(config.matrix.alphas[0]),
                               observation="rl2" if args.kind == "rl2" else "matrix")
        predictor = Network(matrix_predictor_spec())
    else:
        env = TsgEnvAdapter(config.tsg.tsg_config(), config.tsg.wave_size)
        predictor = Network(skill_predictor_spec(net))
    if agent.conditioned and not args.predictor:
        raise UsageError("--predictor is required for a conditioned policy", code="MISSING_ARGUMENT")
    bundle = PolicyBundle(
        args.experiment or args.kind,
        args.seed,
        agent,
        load_params(args.policy),
        env,
        predictor if agent.conditioned else None,
        load_params(args.predictor) if agent.conditioned else None,
        population_seed=args.population_seed,
    )
    rows = evaluate(bundle, args.partners, args.episodes, np.random.default_rng(args.seed), args.reference)
    write_results(rows, args.out)
    print(f"{len(rows)} rows written to {args.out}")


def oracle_command(args) -> None:
    config = experiment_config(args.config, "tsg")
    cfg = config.tsg.tsg_config()
    dump = [] if args.dump else None
    rows = oracle_rows(args.n, cfg, np.random.default_rng(args.seed), args.seed, dump)
    for row in rows:
        print(f"{row.partner}: mean length {row.mean_length:.3f} (std {row.std_length:.3f}), "
              f"mean return {row.mean_return:.4f}")
    if dump is not None:
        write_layout_dump(dump, args.dump)
        logger.info("Layout dump written to %s", args.dump)


def report_command(args) -> None:
    rows = []
    for path in args.results:
        rows += read_results(path)
    for path in emit_report(rows, args.out, ddof=args.ddof):
        print(path)


def run_command(args) -> None:
    print(os.path.join(run_experiment(load_experiment_config(args.config)), "results.csv"))


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate a trained policy against partner types")
    parser.add_argument("--env", choices=["matrix", "tsg"], required=True)
    parser.add_argument("--kind", choices=["bc", "rl2", "lstm"], required=True)
    parser.add_argument("--policy", required=True)
    parser.add_argument("--predictor")
    parser.add_argument("--partners", nargs="+", required=True, help="skilled, intermediate, novice or dist:<alpha>")
    parser.add_argument("--reference", help="Reference population directory")
    parser.add_argument("--population-seed", type=int, help="Seed of the population the policy trained with")
    parser.add_argument("--episodes", type=int, default=settings.EVAL_EPISODES)
    parser.add_argument("--experiment", help="Experiment name in the report rows")
    parser.add_argument("--out", required=True, help="results.csv to write")
    add_seed_argument(parser)
    add_config_argument(parser)
    parser.set_defaults(handler=eval_command)

    parser = subparsers.add_parser("oracle", help="Monte-Carlo optimal plans on random layouts")
    parser.add_argument("--n", type=int, default=settings.ORACLE_LAYOUTS)
    parser.add_argument("--dump", help="Write one line per layout to this file")
    add_seed_argument(parser)
    add_config_argument(parser)
    parser.set_defaults(handler=oracle_command)

    parser = subparsers.add_parser("report", help="Merge results files into a report")
    parser.add_argument("--results", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--ddof", type=int, choices=[0, 1], default=0)
    parser.set_defaults(handler=report_command)

    parser = subparsers.add_parser("run", help="Run or resume a whole experiment")
    parser.add_argument("--config", required=True)
    parser.set_defaults(handler=run_command)
