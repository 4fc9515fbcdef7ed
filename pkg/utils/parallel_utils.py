"""
Worker-pool helpers for grid cells and Monte Carlo blocks
"""

import logging
import os
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit count, else KEYRATE_WORKERS; 0 or negative means one per CPU"""
    count = config.WORKERS if workers is None else workers
    if count <= 0:
        count = os.cpu_count() or 1
    return count

def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None,
                kind: str = "process") -> List[R]:
    """
    Apply func to every item and return results in input order.

    Results are independent of the worker count, which keeps reductions deterministic.
    With a single worker everything runs in-process.

    Args:
        func: Top-level picklable callable when kind is "process"
        items: Work items
        workers: Worker count override
        kind: "process" or "thread"
    """
    items = list(items)
    count = min(resolve_workers(workers), max(1, len(items)))
    if count == 1:
        return [func(item) for item in items]

    executor_cls = {"process": ProcessPoolExecutor, "thread": ThreadPoolExecutor}.get(kind)
    if executor_cls is None:
        raise ValueError(f"Unknown executor kind: {kind}")

    logger.debug(f"Dispatching {len(items)} items to {count} {kind} workers")
    executor: Executor
    with executor_cls(max_workers=count) as executor:
        return list(executor.map(func, items))
