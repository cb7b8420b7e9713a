import logging
import os

from dotenv import load_dotenv

# Pick up a .env file from the working directory, if any
load_dotenv()

DEFAULT_DATABASE_URL = "sqlite:///polsynth_runs.db"


def _optional_float(name: str):
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return None
    return float(value)


class Settings:
    """Environment-backed defaults. CLI flags and problem-file options override them."""

    def __init__(self):
        self.database_url = os.getenv("POLSYNTH_DATABASE_URL", DEFAULT_DATABASE_URL)
        self.log_level = os.getenv("POLSYNTH_LOG_LEVEL", "WARNING").upper()
        self.timeout = _optional_float("POLSYNTH_TIMEOUT")
        self.max_iters = int(os.getenv("POLSYNTH_MAX_ITERS", "50"))
        self.growth_factor = float(os.getenv("POLSYNTH_GROWTH_FACTOR", "10"))
        self.workers = int(os.getenv("POLSYNTH_WORKERS", "1"))

    def to_dict(self) -> dict:
        return {
            "database_url": self.database_url,
            "log_level": self.log_level,
            "timeout": self.timeout,
            "max_iters": self.max_iters,
            "growth_factor": self.growth_factor,
            "workers": self.workers,
        }


def configure_logging(settings: Settings, verbosity: int = 0) -> None:
    level = getattr(logging, settings.log_level, logging.WARNING)
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = min(level, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
