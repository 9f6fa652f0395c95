"""Single-threaded backend."""

from typing import Callable, List, Sequence, TypeVar

from octrans.models.schemas import BackendKind

from .base import Backend, raise_first

T = TypeVar("T")


class SerialBackend(Backend):
    """Evaluates chunks one after another on the calling thread."""

    kind = BackendKind.SERIAL

    def _run(self, task: Callable[[range], T], chunks: Sequence[range]) -> List[T]:
        results: List[T] = []
        for chunk in chunks:
            try:
                results.append(task(chunk))
            except Exception as exc:  # noqa: BLE001
                raise_first([exc])
        return results
