"""Configuration management for octrans."""

from functools import lru_cache
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from octrans.models.schemas import BackendConfig, BackendKind, IpmOptions, Scheme


class Settings(BaseSettings):
    """Application settings, read from ``OCTRANS_*`` environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="OCTRANS_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="WARNING")
    log_format: str = Field(default="console")
    log_file: Optional[str] = Field(default=None)

    # Backend
    backend: BackendKind = Field(default=BackendKind.SERIAL)
    threads: int = Field(default=4, ge=1)
    chunk_size: int = Field(default=512, ge=1)

    # Transcription
    scheme: Scheme = Field(default=Scheme.TRAPEZOID)
    grid_size: int = Field(default=250, ge=1)

    # Solver
    tol: float = Field(default=1e-8, gt=0.0)
    max_iter: int = Field(default=3000, ge=1)
    refinement_rounds: int = Field(default=5, ge=0)
    scaling: bool = Field(default=True)

    # Debugging
    dump_kkt_dir: Optional[str] = Field(default=None)

    # Bench
    bench_max_grid_size: int = Field(default=20000, ge=1)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        allowed = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in allowed:
            raise ValueError(f"Log level must be one of: {allowed}")
        return v.upper()

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Validate log format."""
        allowed = ["json", "console"]
        if v.lower() not in allowed:
            raise ValueError(f"Log format must be one of: {allowed}")
        return v.lower()

    @property
    def backend_config(self) -> BackendConfig:
        """Get backend configuration."""
        workers = self.threads if self.backend == BackendKind.PARALLEL else 1
        return BackendConfig(
            kind=self.backend, workers=workers, chunk_size=self.chunk_size
        )

    @property
    def ipm_options(self) -> IpmOptions:
        """Get default solver options."""
        return IpmOptions(
            tol=self.tol,
            max_iter=self.max_iter,
            refinement_rounds=self.refinement_rounds,
            scaling=self.scaling,
            dump_kkt_dir=self.dump_kkt_dir,
            backend=self.backend_config,
        )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
