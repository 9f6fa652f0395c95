"""Benchmark sweep schemas."""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from .backend import BackendKind
from .ipm import SolveStatus
from .transcription import Scheme


class BenchCase(BaseModel):
    """One problem swept over grid sizes and backends."""

    name: str = Field(..., description="Problem name")
    source: Optional[str] = Field(
        default=None, description="Path to an .ocp file; embedded source if unset"
    )
    scheme: Scheme = Field(default=Scheme.TRAPEZOID)
    grid_sizes: List[int] = Field(..., description="Strictly increasing N values")
    backends: List[BackendKind] = Field(
        default_factory=lambda: [BackendKind.SERIAL, BackendKind.PARALLEL]
    )
    expected_objective: Optional[float] = Field(default=None)
    objective_tolerance: float = Field(default=1e-3, gt=0.0)
    drift_tolerance: Optional[float] = Field(
        default=1e-3,
        gt=0.0,
        description="Bound on |J_N - J_4N| / (1 + |J_4N|); unset disables",
    )

    @field_validator("grid_sizes")
    @classmethod
    def validate_grid_sizes(cls, v: List[int]) -> List[int]:
        """Grid sizes must be positive and strictly increasing."""
        if not v:
            raise ValueError("at least one grid size is required")
        if any(n < 1 for n in v):
            raise ValueError("grid sizes must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("grid sizes must be strictly increasing")
        return v

    @field_validator("backends")
    @classmethod
    def validate_backends(cls, v: List[BackendKind]) -> List[BackendKind]:
        """At least one backend."""
        if not v:
            raise ValueError("at least one backend is required")
        return v


class BenchConfig(BaseModel):
    """Contents of a bench TOML file."""

    cases: List[BenchCase] = Field(..., description="Cases run in order")
    threads: int = Field(default=4, ge=1)
    tol: float = Field(default=1e-8, gt=0.0)
    max_iter: int = Field(default=3000, ge=1)
    max_grid_size: int = Field(default=20000, ge=1)


class BenchRow(BaseModel):
    """Result of one (case, N, backend) solve."""

    case: str
    grid_size: int
    backend: BackendKind
    status: SolveStatus
    objective: float
    iterations: int
    wall_time: float
    derivative_time: float
    factorization_time: float
    solve_time: float
    nvar: int
    m_con: int
    nnz_kkt: int
    nnz_l: int
    objective_ok: Optional[bool] = None
    drift_ok: Optional[bool] = None
    error: Optional[str] = None


class BenchReport(BaseModel):
    """All rows of a sweep."""

    rows: List[BenchRow] = Field(default_factory=list)

    @property
    def success(self) -> bool:
        """True iff every solve is optimal and every objective check passed."""
        return bool(self.rows) and all(
            row.status == SolveStatus.OPTIMAL
            and row.objective_ok is not False
            and row.drift_ok is not False
            for row in self.rows
        )
