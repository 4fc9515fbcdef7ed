"""
Output helpers: full-precision CSV/JSON emission with atomic write-then-rename
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from typing import Any, Iterable, Optional, Sequence

import config

logger = logging.getLogger(__name__)

def format_number(value: Any) -> str:
    """17 significant digits for reals, plain str for everything else"""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    try:
        return f"{float(value):.17g}"
    except (TypeError, ValueError):
        return str(value)

def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()

def _json_safe(value: Any) -> Any:
    """Non-finite floats become null so the output stays strict JSON"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value

def json_text(payload: Any) -> str:
    return json.dumps(_json_safe(payload), indent=2, sort_keys=False, allow_nan=False)

def resolve_output_path(path: str) -> str:
    """Bare file names land in the configured output directory"""
    if os.path.dirname(path):
        return path
    return os.path.join(config.OUTPUT_DIR, path)

def atomic_write(path: str, text: str) -> str:
    """
    Write text to path via a temporary file in the same directory and os.replace,
    so a failed run never leaves a partial file behind.

    Returns:
        The path actually written
    """
    target = resolve_output_path(path)
    directory = os.path.dirname(os.path.abspath(target))
    os.makedirs(directory, exist_ok=True)

    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, target)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        logger.error(f"Failed to write {target}")
        raise
    logger.info(f"Wrote {target}")
    return target

def write_json(path: str, payload: Any) -> str:
    return atomic_write(path, json_text(payload) + "\n")

def emit(text: str, path: Optional[str] = None, echo=print) -> None:
    """Send text to a file when a path is given, to stdout otherwise"""
    if path:
        atomic_write(path, text)
    else:
        echo(text.rstrip("\n"))
