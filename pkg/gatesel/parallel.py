import concurrent.futures
import logging
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_parallel(function: Callable[[T], R], jobs: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply ``function`` to every job, in a thread pool when workers > 1.

    Results come back in submission order whatever order the jobs finish
    in. The first exception raised by a job propagates.
    """
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]

    results: List[R] = [None] * len(jobs)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(function, job): i for i, job in enumerate(jobs)}
        for future in concurrent.futures.as_completed(futures):
            index = futures[future]
            results[index] = future.result()
            logger.debug("Job %d/%d finished", index + 1, len(jobs))
    return results
