"""Thread-pool backend."""

from concurrent.futures import Future, ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from octrans.core.logging import get_logger
from octrans.models.schemas import BackendKind

from .base import Backend, raise_first

logger = get_logger(__name__)

T = TypeVar("T")


class ParallelBackend(Backend):
    """Evaluates chunks on a reusable pool of worker threads.

    Tasks write disjoint buffer regions, and numpy releases the GIL inside
    its vectorized loops.
    """

    kind = BackendKind.PARALLEL

    def __init__(self, workers: int = 4, chunk_size: int = 512):
        super().__init__(chunk_size=chunk_size)
        if workers < 1:
            raise ValueError("workers must be positive")
        self._workers = workers
        self._pool: Optional[ThreadPoolExecutor] = None

    @property
    def workers(self) -> int:
        return self._workers

    def _executor(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(
                max_workers=self._workers, thread_name_prefix="octrans"
            )
            logger.debug("worker_pool_started", workers=self._workers)
        return self._pool

    def _run(self, task: Callable[[range], T], chunks: Sequence[range]) -> List[T]:
        if self._workers == 1 or len(chunks) <= 1:
            results: List[T] = []
            for chunk in chunks:
                try:
                    results.append(task(chunk))
                except Exception as exc:  # noqa: BLE001
                    raise_first([exc])
            return results

        futures: List[Future] = [self._executor().submit(task, c) for c in chunks]
        errors = [f.exception() for f in futures]
        raise_first(errors)
        return [f.result() for f in futures]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None
