import math
import os
from multiprocessing import Pool
from typing import Any, Callable, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

import logger
from errors import ParameterDomainError
from utils.numerics import RngStream

load_dotenv()

# realizations per chunk; independent of the worker count
DEFAULT_CHUNK_SIZE = 2000

ChunkTask = Callable[[int, RngStream], Any]


def default_workers() -> int:
    """Worker count from FSO_WORKERS, defaulting to 1 (serial)."""
    try:
        return max(1, int(os.getenv("FSO_WORKERS", "1")))
    except ValueError:
        logger.warning("FSO_WORKERS is not an integer; running serially")
        return 1


def _run_chunk(job):
    task, size, seed, stream_id, path = job
    return task(size, RngStream(seed, stream_id, path))


def fsum_arrays(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise compensated sum of equally shaped arrays, in the given order."""
    stacked = np.stack([np.asarray(p, dtype=float) for p in parts])
    flat = stacked.reshape(len(parts), -1)
    merged = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return merged.reshape(stacked.shape[1:])


class MonteCarloExecutor:
    """Runs a Monte Carlo budget in fixed-size chunks.

    Chunk k draws from ``rng.child(k)`` and results come back in chunk order,
    so the merged estimate depends only on (seed, budget, chunk size) and not on
    how many worker processes were used.
    """

    def __init__(self, workers: Optional[int] = None, chunk_size: int = DEFAULT_CHUNK_SIZE):
        if chunk_size < 1:
            raise ParameterDomainError("chunk_size must be at least 1")
        self.workers = default_workers() if workers is None else max(1, int(workers))
        self.chunk_size = int(chunk_size)

    def plan(self, total: int) -> List[int]:
        """Chunk sizes covering ``total`` realizations."""
        if total < 1:
            raise ParameterDomainError("Monte Carlo budget must be at least 1")
        full, rest = divmod(int(total), self.chunk_size)
        return [self.chunk_size] * full + ([rest] if rest else [])

    def run(self, task: ChunkTask, total: int, rng: RngStream) -> List[Any]:
        """Evaluate ``task(size, stream)`` for every chunk.

        Args:
            task: Picklable callable when workers > 1
            total: Number of realizations
            rng: Parent stream; it is not advanced

        Returns:
            Chunk results in chunk order
        """
        sizes = self.plan(total)
        jobs = [(task, size, rng.seed, rng.stream_id, rng.path + (k,)) for k, size in enumerate(sizes)]
        logger.debug(f"running {total} realizations in {len(jobs)} chunks on {self.workers} worker(s)")
        if self.workers > 1 and len(jobs) > 1:
            with Pool(processes=min(self.workers, len(jobs))) as pool:
                return pool.map(_run_chunk, jobs)
        return [_run_chunk(job) for job in jobs]

    def sum(self, task: ChunkTask, total: int, rng: RngStream) -> np.ndarray:
        """Run ``task`` and merge the per-chunk arrays with :func:`math.fsum`."""
        return fsum_arrays(self.run(task, total, rng))
