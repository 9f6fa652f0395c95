"""Base class for evaluation backends."""

from abc import ABC, abstractmethod
from typing import Callable, List, Optional, Sequence, TypeVar

from octrans.core.exceptions import EvaluationError
from octrans.core.logging import get_logger
from octrans.models.schemas import BackendKind

logger = get_logger(__name__)

T = TypeVar("T")


class Backend(ABC):
    """Maps per-chunk tasks over grid index ranges.

    Ranges are cut into chunks of ``chunk_size`` consecutive indices. The
    chunking depends only on the range and the chunk size, never on the
    worker count, so reductions combine the same partial sums in the same
    order on every backend.
    """

    kind: BackendKind

    def __init__(self, chunk_size: int = 512):
        if chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        self.chunk_size = chunk_size

    @property
    def workers(self) -> int:
        return 1

    def chunks(self, index_range: range) -> List[range]:
        """Split ``index_range`` into consecutive chunks."""
        step = self.chunk_size
        return [
            range(lo, min(lo + step, index_range.stop))
            for lo in range(index_range.start, index_range.stop, step)
        ]

    @abstractmethod
    def _run(self, task: Callable[[range], T], chunks: Sequence[range]) -> List[T]:
        """Run ``task`` on every chunk and return results in chunk order."""
        pass

    def par_map(self, task: Callable[[range], None], index_range: range) -> None:
        """Run a buffer-writing task over disjoint chunks of ``index_range``."""
        chunks = self.chunks(index_range)
        if chunks:
            self._run(task, chunks)

    def par_reduce(self, task: Callable[[range], float], index_range: range) -> float:
        """Sum per-chunk partial results sequentially in chunk order."""
        total = 0.0
        for partial in self._run(task, self.chunks(index_range)):
            total += partial
        return total

    def close(self) -> None:
        """Release worker resources."""

    def __enter__(self) -> "Backend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __repr__(self) -> str:
        name = type(self).__name__
        return f"{name}(workers={self.workers}, chunk_size={self.chunk_size})"


def raise_first(errors: Sequence[Optional[BaseException]]) -> None:
    """Surface the first failed chunk as an evaluation failure."""
    failed = [e for e in errors if e is not None]
    if not failed:
        return
    first = failed[0]
    logger.debug("chunk_evaluation_failed", failures=len(failed), error=str(first))
    if isinstance(first, EvaluationError):
        raise first
    raise EvaluationError(f"worker failed: {first}") from first
