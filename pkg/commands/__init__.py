"""
Command groups of the coopmeta CLI. Each module exposes `register(subparsers)`,
which adds its subcommands and binds a handler taking the parsed arguments.
"""
from typing import Optional

from pydantic import ValidationError

from exceptions import ConfigurationError
from schemas.experiment_schemas import ExperimentConfig, load_experiment_config


def experiment_config(path: Optional[str], env: str, name: str = "cli") -> ExperimentConfig:
    """The INI config when given, otherwise every default for `env`"""
    if path:
        return load_experiment_config(path)
    return ExperimentConfig.model_validate({"experiment": {"name": name, "env": env}})


def with_overrides(model, **overrides):
    """Copy of a pydantic model with the non-None overrides applied and re-validated"""
    changes = {key: value for key, value in overrides.items() if value is not None}
    if not changes:
        return model
    try:
        return type(model).model_validate({**model.model_dump(), **changes})
    except ValidationError as error:
        raise ConfigurationError("Invalid command-line override", details=[item["msg"] for item in error.errors()]) from None


def add_config_argument(parser) -> None:
    parser.add_argument("--config", help="Experiment INI file supplying sizes and hyper-parameters")


def add_seed_argument(parser, default: int = 0) -> None:
    parser.add_argument("--seed", type=int, default=default, help="Random seed")
