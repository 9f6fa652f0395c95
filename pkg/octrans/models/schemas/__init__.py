"""Pydantic schemas for options and reports."""

from .backend import BackendConfig, BackendKind
from .bench import BenchCase, BenchConfig, BenchReport, BenchRow
from .ipm import IpmOptions, KktResiduals, PhaseTimings, Solution, SolveStatus
from .transcription import InitPolicy, Scheme

__all__ = [
    # Backend schemas
    "BackendConfig",
    "BackendKind",
    # Bench schemas
    "BenchCase",
    "BenchConfig",
    "BenchReport",
    "BenchRow",
    # Solver schemas
    "IpmOptions",
    "KktResiduals",
    "PhaseTimings",
    "Solution",
    "SolveStatus",
    # Transcription schemas
    "InitPolicy",
    "Scheme",
]
