"""
Worker Pool: runs independent study tasks on a fixed number of threads.

Every study fans out over independent (grid point, seed) tasks. Results are
always returned in submission order, so reports do not depend on how many
workers ran them or in which order tasks finished. numpy and scipy release
the GIL inside their kernels, which is where these tasks spend their time.

Random streams are derived from (base seed, task keys) with
numpy.random.SeedSequence, never from a shared generator, so a task draws
the same numbers regardless of the worker that runs it.

Progress bars go to stderr through tqdm and are disabled when stderr is not
a terminal or when the pool is quiet.
"""
import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def task_rng(base_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for one task, determined by the seed and keys only."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), *[int(k) for k in keys]]))


def task_seed(base_seed: int, *keys: int) -> int:
    """A 63-bit integer seed derived like task_rng, for APIs that take ints."""
    state = np.random.SeedSequence([int(base_seed), *[int(k) for k in keys]]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


class WorkerPool:
    """
    Ordered thread pool sized by the --jobs flag.

    jobs == 1 runs tasks inline on the calling thread. The pool-wide default
    is set once by the CLI through configure() and read by studies through
    get_default(); the lock guards that shared setting.
    """

    _default_jobs = 1
    _quiet = False
    _lock = threading.Lock()

    def __init__(self, jobs: Optional[int] = None, quiet: Optional[bool] = None):
        self.jobs = max(1, jobs if jobs is not None else WorkerPool._default_jobs)
        self.quiet = WorkerPool._quiet if quiet is None else quiet

    @classmethod
    def configure(cls, jobs: int, quiet: bool = False) -> None:
        with cls._lock:
            cls._default_jobs = max(1, int(jobs))
            cls._quiet = quiet
        logger.debug(f"Worker pool configured with {cls._default_jobs} job(s)")

    @classmethod
    def get_default(cls) -> "WorkerPool":
        with cls._lock:
            return cls(cls._default_jobs, cls._quiet)

    def _progress(self, total: int, desc: Optional[str]) -> tqdm:
        disable = self.quiet or desc is None or not sys.stderr.isatty()
        return tqdm(total=total, desc=desc, file=sys.stderr, disable=disable, leave=False)

    def map(self, fn: Callable[[T], R], items: Iterable[T], desc: Optional[str] = None) -> List[R]:
        """Apply fn to every item; results come back in input order."""
        tasks: Sequence[T] = list(items)
        results: List[R] = []
        with self._progress(len(tasks), desc) as bar:
            if self.jobs == 1 or len(tasks) <= 1:
                for item in tasks:
                    results.append(fn(item))
                    bar.update(1)
                return results
            with ThreadPoolExecutor(max_workers=min(self.jobs, len(tasks))) as executor:
                for result in executor.map(fn, tasks):
                    results.append(result)
                    bar.update(1)
        return results


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: Optional[int] = None,
    desc: Optional[str] = None,
) -> List[R]:
    """WorkerPool(jobs).map(fn, items); jobs=None uses the configured default."""
    pool = WorkerPool(jobs) if jobs is not None else WorkerPool.get_default()
    return pool.map(fn, items, desc=desc)
