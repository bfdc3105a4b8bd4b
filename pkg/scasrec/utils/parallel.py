"""Order-preserving parallel map for seed-partitioned work."""

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def get_optimal_workers() -> int:
    """
    Get optimal number of worker processes.

    Returns:
        Number of workers (at least 1)
    """
    cpu_count = multiprocessing.cpu_count()
    return min(cpu_count, 8) if cpu_count > 1 else 1


def map_ordered(
    items: Sequence[T],
    processor: Callable[[T], R],
    max_workers: Optional[int] = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
    chunk_size: Optional[int] = None,
) -> List[R]:
    """
    Apply ``processor`` to every item, returning results in input order.

    Results never depend on the worker count as long as ``processor`` derives
    all randomness from its item.

    Args:
        items: Work items
        processor: Picklable function applied to each item
        max_workers: Number of processes (1 = run inline, None = auto)
        progress_callback: Optional callback(completed, total)
        chunk_size: Items per submitted task (None = auto)

    Returns:
        List of results aligned with ``items``
    """
    if not items:
        return []

    if max_workers is None:
        max_workers = get_optimal_workers()

    total = len(items)
    if max_workers <= 1 or total < 2:
        results = []
        for index, item in enumerate(items):
            results.append(processor(item))
            if progress_callback:
                progress_callback(index + 1, total)
        return results

    if chunk_size is None:
        chunk_size = max(1, total // (max_workers * 4))

    logger.debug("Mapping %d items over %d processes", total, max_workers)
    results = []
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        # executor.map yields in submission order
        for index, result in enumerate(executor.map(processor, items, chunksize=chunk_size)):
            results.append(result)
            if progress_callback:
                progress_callback(index + 1, total)
    return results
