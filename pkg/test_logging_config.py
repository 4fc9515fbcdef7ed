import logging
import os

from logging_config import setup_logging


def _close_root_handlers():
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()


def test_rotating_files_are_created(tmp_path):
    log_dir = tmp_path / "logs"
    paths = setup_logging(log_level="DEBUG", log_dir=str(log_dir), app_name="run", enable_console=False)
    try:
        logging.getLogger("services.phase_error").error("eigensolver budget exhausted")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert paths == [str(log_dir / "run.log"), str(log_dir / "run_errors.log")]
        assert all(os.path.exists(p) for p in paths)
        assert "eigensolver budget exhausted" in (log_dir / "run_errors.log").read_text(encoding="utf-8")
    finally:
        _close_root_handlers()


def test_console_only_leaves_no_directory(tmp_path):
    log_dir = tmp_path / "never"
    paths = setup_logging(log_dir=str(log_dir), enable_file=False, enable_error_file=False)
    assert paths == []
    assert not log_dir.exists()
    _close_root_handlers()


def test_repeated_setup_does_not_stack_handlers():
    setup_logging(enable_file=False, enable_error_file=False)
    setup_logging(enable_file=False, enable_error_file=False)
    assert len(logging.getLogger().handlers) == 1
    _close_root_handlers()


def test_unknown_level_falls_back_to_info(capsys):
    setup_logging(log_level="chatty", enable_file=False, enable_error_file=False)
    console = logging.getLogger().handlers[0]
    assert console.level == logging.INFO
    assert "Unknown log level 'chatty'" in capsys.readouterr().err
    _close_root_handlers()


def test_numerics_loggers_are_quieted():
    setup_logging(enable_file=False, enable_error_file=False)
    assert logging.getLogger("numpy").level == logging.WARNING
    assert logging.getLogger("scipy").level == logging.WARNING
    _close_root_handlers()
