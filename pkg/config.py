import logging
from decouple import config
from typing import List


class Settings:
    """Process-wide settings read from the environment or a .env file"""

    # Output Configuration
    COOPMETA_OUT: str = config("COOPMETA_OUT", default="./runs")

    # Logging Configuration
    LOG_LEVEL: str = config("LOG_LEVEL", default="INFO")
    LOG_FORMAT: str = config(
        "LOG_FORMAT",
        default="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    SHOW_PROGRESS: bool = config("SHOW_PROGRESS", default=True, cast=bool)

    # Experiment Defaults
    DEFAULT_SEEDS: int = config("DEFAULT_SEEDS", default=5, cast=int)
    EVAL_EPISODES: int = config("EVAL_EPISODES", default=1000, cast=int)
    ORACLE_LAYOUTS: int = config("ORACLE_LAYOUTS", default=10000, cast=int)
    MATRIX_ALPHAS: List[float] = config(
        "MATRIX_ALPHAS",
        default="0.01,0.03,0.1,0.3,1.0,3.0",
        cast=lambda value: [float(item) for item in value.split(",") if item.strip()]
    )

    # File Formats
    CHECKPOINT_FORMAT_VERSION: int = 1
    MANIFEST_FORMAT_VERSION: int = 1

    # Application Settings
    PROJECT_NAME: str = "coopmeta"
    VERSION: str = "1.0.0"
    DESCRIPTION: str = "Behaviour-conditioned policies for cooperative meta-RL"


settings = Settings()


def configure_logging(level: str = "") -> None:
    """Install the root log handler once; later calls only adjust the level"""
    resolved = (level or settings.LOG_LEVEL).upper()
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=resolved, format=settings.LOG_FORMAT)
    root.setLevel(resolved)
