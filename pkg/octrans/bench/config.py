"""Bench sweep configuration files."""

from pathlib import Path
from typing import Dict, Optional, Union

import toml
from pydantic import ValidationError

from octrans.core.config import get_settings
from octrans.core.exceptions import ConfigurationException, ValidationException
from octrans.core.logging import get_logger
from octrans.models.schemas import BackendKind, BenchCase, BenchConfig

logger = get_logger(__name__)

# Final objectives of the bundled problems with a known optimum. Quadrotor has
# none and is held to the grid drift check instead.
REFERENCE_OBJECTIVES: Dict[str, float] = {
    "double_integrator": 6.0,
    "goddard": 1.01283,
}


def default_bench_config() -> BenchConfig:
    """Desk-scale sweep over the three bundled problems."""
    settings = get_settings()
    both = [BackendKind.SERIAL, BackendKind.PARALLEL]
    return BenchConfig(
        cases=[
            BenchCase(
                name="double_integrator",
                grid_sizes=[100, 1000],
                backends=both,
                expected_objective=REFERENCE_OBJECTIVES["double_integrator"],
                objective_tolerance=1e-3,
            ),
            BenchCase(
                name="goddard",
                grid_sizes=[100, 400, 1000],
                backends=both,
                expected_objective=REFERENCE_OBJECTIVES["goddard"],
                objective_tolerance=1e-3,
            ),
            BenchCase(name="quadrotor", grid_sizes=[100, 400, 1000], backends=both),
        ],
        threads=settings.threads,
        tol=settings.tol,
        max_iter=settings.max_iter,
        max_grid_size=settings.bench_max_grid_size,
    )


def load_bench_config(path: Union[str, Path]) -> BenchConfig:
    """Read a TOML sweep description.

    Example::

        threads = 4

        [[cases]]
        name = "goddard"
        grid_sizes = [100, 1000]
        backends = ["serial", "parallel"]
    """
    path = Path(path)
    try:
        data = toml.load(path)
    except FileNotFoundError as exc:
        raise ConfigurationException(
            f"bench config {path} not found", config_key="config"
        ) from exc
    except toml.TomlDecodeError as exc:
        raise ConfigurationException(
            f"bench config {path} is not valid TOML: {exc}", config_key="config"
        ) from exc
    try:
        config = BenchConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ValidationException(
            f"invalid bench config {path}: {where}: {first['msg']}",
            details={"errors": exc.error_count()},
        ) from exc
    logger.debug("bench_config_loaded", path=str(path), cases=len(config.cases))
    return config


def resolve_base_dir(path: Optional[Union[str, Path]]) -> Optional[Path]:
    """Directory relative case sources are read from."""
    return Path(path).resolve().parent if path is not None else None
