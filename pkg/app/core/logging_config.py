import logging
import logging.config
from pathlib import Path
from typing import Optional

from app.core.config import settings

LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"
LOG_DATEFMT = "%H:%M:%S"


def configure_logging(level: Optional[str] = None, config_path: Optional[str] = None) -> None:
    """Configure logging from the ini file, or a basic stderr handler if it is missing.

    Args:
        level: Optional level name overriding the file/settings level.
        config_path: Path to a `fileConfig` ini file (defaults to settings.LOG_CONFIG).
    """
    path = Path(config_path or settings.LOG_CONFIG)
    if path.is_file():
        logging.config.fileConfig(str(path), disable_existing_loggers=False)
    else:
        logging.basicConfig(format=LOG_FORMAT, datefmt=LOG_DATEFMT)

    logging.getLogger("app").setLevel((level or settings.LOG_LEVEL).upper())
