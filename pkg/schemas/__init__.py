from .env_schemas import (
    ActionDistribution,
    MatrixConfig,
    TsgConfig
)

from .label_schemas import (
    SkillLevel,
    DistributionLabel,
    SkillLabel,
    BehaviourLabel
)

from .network_schemas import (
    LayerSpec,
    NetSpec,
    TsgNetConfig
)

from .training_schemas import (
    PpoHyper,
    OptimConfig,
    IterationStats,
    PredictorConfig,
    PredictorStats
)

from .population_schemas import (
    PopulationConfig,
    SnapshotInfo,
    PopulationManifest
)

from .experiment_schemas import (
    ExperimentConfig,
    EvalRow,
    SummaryRow,
    load_experiment_config,
    parse_experiment_config
)

__all__ = [
    "ActionDistribution",
    "MatrixConfig",
    "TsgConfig",
    "SkillLevel",
    "DistributionLabel",
    "SkillLabel",
    "BehaviourLabel",
    "LayerSpec",
    "NetSpec",
    "TsgNetConfig",
    "PpoHyper",
    "OptimConfig",
    "IterationStats",
    "PredictorConfig",
    "PredictorStats",
    "PopulationConfig",
    "SnapshotInfo",
    "PopulationManifest",
    "ExperimentConfig",
    "EvalRow",
    "SummaryRow",
    "load_experiment_config",
    "parse_experiment_config"
]
