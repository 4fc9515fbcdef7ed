"""
Logging configuration for the key-rate toolkit.

Results are the only thing written to stdout; every log record goes to stderr and,
when enabled, to rotating files under the log directory. Library modules only call
logging.getLogger(__name__); handlers are attached here, once per CLI invocation.
"""

import os
import sys
import logging
import logging.handlers
from typing import List, Optional

FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(funcName)s - %(message)s'
CONSOLE_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

# suffix -> (handler level, max bytes, backups)
LOG_FILES = {
    '': (logging.DEBUG, 10 * 1024 * 1024, 5),
    '_errors': (logging.ERROR, 5 * 1024 * 1024, 3),
}

# Numerics libraries are chatty at DEBUG
QUIET_LOGGERS = ('numpy', 'scipy', 'matplotlib')


def _resolve_level(name: str) -> Optional[int]:
    level = logging.getLevelName(str(name).upper())
    return level if isinstance(level, int) else None


def _rotating_handler(path: str, level: int, max_bytes: int, backups: int) -> logging.Handler:
    handler = logging.handlers.RotatingFileHandler(path, maxBytes=max_bytes, backupCount=backups, encoding='utf-8')
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(FILE_FORMAT))
    return handler


def setup_logging(
    log_level: str = "INFO",
    log_dir: str = "logs",
    app_name: str = "cvqkd_keyrate",
    enable_console: bool = True,
    enable_file: bool = True,
    enable_error_file: bool = True
) -> List[str]:
    """
    Configure the root logger for one run.

    Args:
        log_level: Console level name; unknown names fall back to INFO
        log_dir: Directory for the rotating files, created on demand
        app_name: Stem of the log file names
        enable_console: Log to stderr
        enable_file: Keep the general DEBUG log
        enable_error_file: Keep the separate ERROR log

    Returns:
        Paths of the log files in use
    """
    console_level = _resolve_level(log_level)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    # repeated invocations in one process (tests, CliRunner) must not stack handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        if isinstance(handler, logging.FileHandler):
            handler.close()

    if enable_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(console_level or logging.INFO)
        console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        root_logger.addHandler(console_handler)

    wanted = {'': enable_file, '_errors': enable_error_file}
    paths = []
    if any(wanted.values()):
        os.makedirs(log_dir, exist_ok=True)
    for suffix, (level, max_bytes, backups) in LOG_FILES.items():
        if not wanted[suffix]:
            continue
        path = os.path.join(log_dir, f"{app_name}{suffix}.log")
        root_logger.addHandler(_rotating_handler(path, level, max_bytes, backups))
        paths.append(path)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)
    # numpy overflow/invalid-value RuntimeWarnings end up in the log files too
    logging.captureWarnings(True)

    logger = logging.getLogger(__name__)
    if console_level is None:
        logger.warning(f"Unknown log level {log_level!r}, using INFO")
    logger.debug(f"Logging configured: console={enable_console}, files={paths or 'none'}")
    return paths


def get_logger(name: str) -> logging.Logger:
    """Module logger; pass __name__."""
    return logging.getLogger(name)


def setup_from_settings(log_level: Optional[str] = None) -> List[str]:
    """Configure logging from config.py; log_level (e.g. from --log-level) overrides KEYRATE_LOG_LEVEL."""
    import config

    return setup_logging(
        log_level=log_level or config.LOG_LEVEL,
        log_dir=config.LOG_DIR,
        app_name=config.APP_NAME,
        enable_file=config.LOG_TO_FILE,
        enable_error_file=config.LOG_TO_FILE,
    )
