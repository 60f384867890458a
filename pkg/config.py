import logging
import os
import sys
from pathlib import Path

import structlog
from dotenv import dotenv_values, load_dotenv


# Locations a deploy might mount the .env file at
possible_paths = [
    Path(__file__).parent / '.env',      # app root folder
    Path('/etc/secrets/.env'),           # Render secret files folder
]

env_path = None
for path in possible_paths:
    if path.exists():
        env_path = path
        break

if env_path:
    load_dotenv(dotenv_path=env_path)


DATABASE_URL = os.getenv("ITEMSEL_DATABASE_URL", "sqlite:///./itemsel.db")
THREADS = int(os.getenv("ITEMSEL_THREADS") or os.cpu_count() or 1)
LOG_LEVEL = os.getenv("ITEMSEL_LOG_LEVEL", "INFO").upper()
LOG_JSON = os.getenv("ITEMSEL_LOG_JSON", "false").lower() in ("1", "true", "yes")

if THREADS < 1:
    raise ValueError(f"ITEMSEL_THREADS must be positive, got {THREADS}")


def configure_logging(level: str = LOG_LEVEL, json_output: bool = LOG_JSON) -> None:
    """Route structlog events to stderr so stdout stays free for CLI data."""
    renderer = structlog.processors.JSONRenderer() if json_output else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level, logging.INFO)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parses a flat key=value experiment config file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return {key: value for key, value in dotenv_values(path).items() if value is not None}


configure_logging()
