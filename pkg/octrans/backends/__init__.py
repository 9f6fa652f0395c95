"""Evaluation backends."""

from .accelerator import AcceleratorBackend
from .base import Backend
from .factory import BackendFactory, get_backend
from .parallel import ParallelBackend
from .serial import SerialBackend

__all__ = [
    "Backend",
    "SerialBackend",
    "ParallelBackend",
    "AcceleratorBackend",
    "BackendFactory",
    "get_backend",
]
