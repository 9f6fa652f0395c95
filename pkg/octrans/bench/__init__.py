"""Benchmark problems and sweeps."""

from .config import (
    REFERENCE_OBJECTIVES,
    default_bench_config,
    load_bench_config,
    resolve_base_dir,
)
from .library import available_problems, load_problem, problem_source
from .render import (
    COLUMNS,
    render_csv,
    render_gnuplot,
    render_markdown,
    rich_table,
)
from .runner import (
    SIZE_CLAIMS,
    SizeClaim,
    check_dimensions,
    check_grid_drift,
    linear_fit,
    objective_drift,
    run_bench,
    run_case,
)

__all__ = [
    # Problems
    "available_problems",
    "load_problem",
    "problem_source",
    # Sweeps
    "run_bench",
    "run_case",
    "check_dimensions",
    "check_grid_drift",
    "objective_drift",
    "linear_fit",
    "SizeClaim",
    "SIZE_CLAIMS",
    # Configuration
    "REFERENCE_OBJECTIVES",
    "default_bench_config",
    "load_bench_config",
    "resolve_base_dir",
    # Rendering
    "COLUMNS",
    "render_csv",
    "render_markdown",
    "render_gnuplot",
    "rich_table",
]
