import logging
import os

# Console-only logging for the test session; set before config.py reads the environment.
os.environ.setdefault("KEYRATE_LOG_TO_FILE", "false")
os.environ.setdefault("KEYRATE_WORKERS", "1")

import pytest


@pytest.fixture(autouse=True)
def _reset_root_handlers():
    """CLI invocations attach handlers to streams that CliRunner closes afterwards."""
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
