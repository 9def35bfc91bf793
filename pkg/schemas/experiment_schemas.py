import configparser
import os
from pydantic import BaseModel, Field, ValidationError, field_validator
from typing import List, Literal, Optional

from config import settings
from exceptions import ConfigurationError, StorageError
from schemas.env_schemas import MatrixConfig, TsgConfig
from schemas.network_schemas import TsgNetConfig
from schemas.population_schemas import PopulationConfig
from schemas.training_schemas import OptimConfig, PpoHyper


def _split_floats(v):
    if isinstance(v, str):
        return [float(item) for item in v.split(",") if item.strip()]
    return v


class ExperimentSection(BaseModel):
    """[experiment]"""
    name: str = Field(..., min_length=1)
    env: Literal["matrix", "tsg"]
    seeds: int = Field(default=settings.DEFAULT_SEEDS, ge=1, description="Number of training seeds")
    first_seed: int = Field(default=0, ge=0)
    output: Optional[str] = Field(default=None, description="Output root, COOPMETA_OUT when unset")


class MatrixSection(BaseModel):
    """[matrix]"""
    alphas: List[float] = Field(default_factory=lambda: list(settings.MATRIX_ALPHAS))
    iterations: int = Field(default=2000, gt=0)
    tasks_per_iteration: int = Field(default=50, gt=0)
    episode_length: int = Field(default=10, gt=0)
    predictor_iterations: int = Field(default=2000, gt=0)
    predictor_episodes: int = Field(default=50, gt=0, description="Trajectories per predictor update")
    predictor_dataset: int = Field(default=5000, gt=0, description="Trajectories generated for predictor training")
    train_rl2: bool = True

    @field_validator("alphas", mode="before")
    @classmethod
    def split_alphas(cls, v):
        return _split_floats(v)

    @field_validator("alphas")
    @classmethod
    def validate_alphas(cls, v):
        if not v or any(alpha <= 0.0 for alpha in v):
            raise ValueError("Concentration parameters must be positive")
        return v

    def matrix_config(self, alpha: float) -> MatrixConfig:
        return MatrixConfig(alpha=alpha, episode_length=self.episode_length, tasks_per_iteration=self.tasks_per_iteration)


class TsgSection(BaseModel):
    """[tsg]"""
    width: int = Field(default=11, gt=0)
    height: int = Field(default=11, gt=0)
    max_steps: int = Field(default=50, ge=1)
    clone_iterations: int = Field(default=3000, ge=0)
    coop_iterations: int = Field(default=1000, ge=0)
    snapshot_interval: int = Field(default=100, gt=0)
    population_eval_episodes: int = Field(default=500, gt=0)
    predictor_iterations: int = Field(default=5000, gt=0)
    predictor_episodes: int = Field(default=100, gt=0, description="Trajectories per predictor update")
    predictor_dataset: int = Field(default=5000, gt=0)
    batch_steps: int = Field(default=4000, gt=0)
    wave_size: int = Field(default=50, gt=0)
    reference_seed: int = Field(default=1000, ge=0, description="Seed of the held-out reference population")
    train_lstm: bool = True
    pre_width: int = Field(default=128, gt=0)
    pre_layers: int = Field(default=7, gt=0)
    post_width: int = Field(default=64, gt=0)
    post_layers: int = Field(default=2, gt=0)
    head_width: int = Field(default=64, gt=0)
    lstm_units: int = Field(default=64, gt=0)

    def tsg_config(self) -> TsgConfig:
        return TsgConfig(width=self.width, height=self.height, max_steps=self.max_steps)

    def net_config(self) -> TsgNetConfig:
        return TsgNetConfig(
            pre_width=self.pre_width,
            pre_layers=self.pre_layers,
            post_width=self.post_width,
            post_layers=self.post_layers,
            head_width=self.head_width,
            lstm_units=self.lstm_units,
        )

    def population_config(self, hyper: PpoHyper, optim: OptimConfig) -> PopulationConfig:
        return PopulationConfig(
            clone_iterations=self.clone_iterations,
            coop_iterations=self.coop_iterations,
            snapshot_interval=self.snapshot_interval,
            eval_episodes=self.population_eval_episodes,
            wave_size=self.wave_size,
            tsg=self.tsg_config(),
            net=self.net_config(),
            hyper=hyper.model_copy(update={"batch_steps": self.batch_steps}),
            optim=optim,
        )


class EvalSection(BaseModel):
    """[eval]"""
    episodes: int = Field(default=settings.EVAL_EPISODES, gt=0)
    std_ddof: int = Field(default=0, ge=0, le=1, description="0 for population std across seeds, 1 for sample std")
    oracle_layouts: int = Field(default=settings.ORACLE_LAYOUTS, gt=0)


class ExperimentConfig(BaseModel):
    """A whole experiment grid, one INI file"""
    experiment: ExperimentSection
    matrix: MatrixSection = Field(default_factory=MatrixSection)
    tsg: TsgSection = Field(default_factory=TsgSection)
    ppo: PpoHyper = Field(default_factory=PpoHyper)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    eval: EvalSection = Field(default_factory=EvalSection)

    @property
    def seeds(self) -> List[int]:
        first = self.experiment.first_seed
        return list(range(first, first + self.experiment.seeds))

    @property
    def output_root(self) -> str:
        """One directory per name and seed range, so root-level stage markers never cross seed sets"""
        seeds = self.seeds
        return os.path.join(
            self.experiment.output or settings.COOPMETA_OUT, self.experiment.name, f"seeds_{seeds[0]}-{seeds[-1]}"
        )

    def seed_dir(self, seed: int) -> str:
        return os.path.join(self.output_root, f"seed_{seed}")

    def matrix_hyper(self) -> PpoHyper:
        steps = self.matrix.tasks_per_iteration * self.matrix.episode_length
        return self.ppo.model_copy(update={"batch_steps": steps, "minibatch_size": min(self.ppo.minibatch_size, steps)})

    def tsg_hyper(self) -> PpoHyper:
        return self.ppo.model_copy(update={"batch_steps": self.tsg.batch_steps})


def parse_experiment_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as error:
        raise ConfigurationError(f"Malformed experiment config {source}: {error}", code="BAD_CONFIG") from None
    sections = {name: dict(parser[name]) for name in parser.sections()}
    try:
        return ExperimentConfig.model_validate(sections)
    except ValidationError as error:
        raise ConfigurationError(
            f"Invalid experiment config {source}",
            code="BAD_CONFIG",
            details=[{"loc": list(item["loc"]), "msg": item["msg"]} for item in error.errors()],
        ) from None


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError:
        raise StorageError(f"Cannot read experiment config {path}", path=path, code="MISSING_FILE") from None
    return parse_experiment_config(text, source=path)


class EvalRow(BaseModel):
    """One line of results.csv"""
    experiment: str
    seed: int
    partner: str
    n_episodes: int = Field(..., gt=0)
    mean_length: float
    std_length: float = Field(..., ge=0.0)
    mean_return: float
    std_return: float = Field(..., ge=0.0)
    mean_last_step_reward: float


class SummaryRow(BaseModel):
    """Mean and spread of EvalRow metrics across seeds"""
    experiment: str
    partner: str
    n_seeds: int = Field(..., ge=2)
    mean_length: float
    std_length: float = Field(..., ge=0.0)
    mean_return: float
    std_return: float = Field(..., ge=0.0)
    mean_last_step_reward: float
    std_last_step_reward: float = Field(..., ge=0.0)
