# Standard library imports
import logging
from pathlib import Path

# Local application imports
from config.config import Config


def setup_logging():
    """
    Set up logging configuration using the log file path and level from the configuration.
    """
    log_path = Path(Config.get("log_path"))
    log_path.parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        filename=str(log_path),
        level=getattr(logging, Config.get("log_level", "INFO")),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
