# Runtime settings
# Values come from the environment; a .env file in the working directory is loaded first.
# See .env.example for the full list.

import os

from dotenv import load_dotenv

load_dotenv()


def _env_flag(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


# Logging
LOG_LEVEL = os.getenv("KEYRATE_LOG_LEVEL", "INFO")
LOG_DIR = os.getenv("KEYRATE_LOG_DIR", "logs")
LOG_TO_FILE = _env_flag("KEYRATE_LOG_TO_FILE", True)
APP_NAME = "cvqkd_keyrate"

# Parallelism: number of worker threads/processes for grids and Monte Carlo shards
WORKERS = int(os.getenv("KEYRATE_WORKERS", "1"))

# Default directory for CSV/JSON results when a command is given a bare file name
OUTPUT_DIR = os.getenv("KEYRATE_OUTPUT_DIR", "results")
