import logging

from commands import add_config_argument, experiment_config, with_overrides
from services.experiment_service import generate_population

logger = logging.getLogger(__name__)


def gen_pop(args) -> None:
    config = experiment_config(args.config, "tsg")
    schedule = with_overrides(
        config.tsg.population_config(config.tsg_hyper(), config.optim),
        clone_iterations=args.clone_iterations,
        coop_iterations=args.coop_iterations,
        snapshot_interval=args.snapshot_interval,
    )
    manifest = generate_population(args.seed, schedule, args.out)
    for level, iteration in manifest.skill_map.items():
        print(f"{level.value}: snapshot {iteration} return {manifest.snapshot(iteration).eval_return:.4f}")


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-pop", help="Train a self-play partner population")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out", required=True, help="Population directory")
    parser.add_argument("--clone-iterations", type=int)
    parser.add_argument("--coop-iterations", type=int)
    parser.add_argument("--snapshot-interval", type=int)
    add_config_argument(parser)
    parser.set_defaults(handler=gen_pop)
