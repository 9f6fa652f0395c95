"""Extension point for device offload."""

from typing import Callable, List, Sequence, TypeVar

from octrans.models.schemas import BackendKind

from .base import Backend

T = TypeVar("T")


class AcceleratorBackend(Backend):
    """Placeholder for a device backend.

    A device implementation would compile each kernel for the device and
    keep the decision vector and buffers resident there.
    """

    kind = BackendKind.ACCELERATOR

    def _run(self, task: Callable[[range], T], chunks: Sequence[range]) -> List[T]:
        raise NotImplementedError("no accelerator backend is bundled")
