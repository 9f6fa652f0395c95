"""Backend factory."""

from typing import Dict, List, Optional, Type

from octrans.core.exceptions import ConfigurationException
from octrans.models.schemas import BackendConfig, BackendKind

from .accelerator import AcceleratorBackend
from .base import Backend
from .parallel import ParallelBackend
from .serial import SerialBackend


class BackendFactory:
    """Factory for creating evaluation backends."""

    _backends: Dict[BackendKind, Type[Backend]] = {
        BackendKind.SERIAL: SerialBackend,
        BackendKind.PARALLEL: ParallelBackend,
        BackendKind.ACCELERATOR: AcceleratorBackend,
    }

    @classmethod
    def create_backend(cls, config: BackendConfig) -> Backend:
        """Create a backend instance."""
        if config.kind not in cls._backends:
            raise ConfigurationException(
                f"Unknown backend kind: {config.kind}", config_key="backend"
            )
        backend_class = cls._backends[config.kind]
        if backend_class is ParallelBackend:
            return ParallelBackend(workers=config.workers, chunk_size=config.chunk_size)
        return backend_class(chunk_size=config.chunk_size)

    @classmethod
    def get_available_backends(cls) -> List[str]:
        """Get list of available backend kinds."""
        return [kind.value for kind in cls._backends]

    @classmethod
    def register_backend(cls, kind: BackendKind, backend_class: Type[Backend]) -> None:
        """Register a custom backend."""
        cls._backends[kind] = backend_class


def get_backend(config: Optional[BackendConfig] = None) -> Backend:
    """Create the backend described by ``config`` (serial by default)."""
    return BackendFactory.create_backend(config or BackendConfig())
