"""Transcribe-and-solve sweeps over grid sizes and backends."""

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from octrans.backends import get_backend
from octrans.core.exceptions import (
    InvariantViolation,
    OctransException,
    ValidationException,
)
from octrans.core.logging import get_logger
from octrans.ipm import solve
from octrans.models.schemas import (
    BackendConfig,
    BackendKind,
    BenchCase,
    BenchConfig,
    BenchReport,
    BenchRow,
    IpmOptions,
    SolveStatus,
)
from octrans.transcription import StructuredNlp, transcribe

from .library import load_problem

logger = get_logger(__name__)

RowCallback = Callable[[BenchRow], None]


@dataclass(frozen=True)
class SizeClaim:
    """Documented problem size: ``nvar + m_con + box rows ~ factor * N``.

    Accepted when ``|size - factor*N| <= slack + relative*factor*N``.
    """

    factor: int
    slack: int
    relative: float = 0.0

    def bound(self, grid_size: int) -> float:
        return self.slack + self.relative * self.factor * grid_size


SIZE_CLAIMS: Dict[str, SizeClaim] = {
    "goddard": SizeClaim(factor=10, slack=12),
    # quoted as 20N +/- 25; the layout counts 22N + 22, past that flat slack
    "quadrotor": SizeClaim(factor=20, slack=25, relative=0.1),
}


def check_dimensions(case: str, nlp: StructuredNlp) -> Dict[str, int]:
    """Size fields of a report row, checked against :data:`SIZE_CLAIMS`."""
    summary = nlp.size_summary()
    claim = SIZE_CLAIMS.get(case)
    if claim is not None:
        n = nlp.grid_size
        deviation = abs(summary["checked_size"] - claim.factor * n)
        if deviation > claim.bound(n):
            raise InvariantViolation(
                f"{case} at N={n} has size {summary['checked_size']}, "
                f"expected about {claim.factor * n}",
                details=summary,
            )
    return {
        "nvar": summary["nvar"],
        "m_con": summary["m_con"],
        "checked_size": summary["checked_size"],
    }


def _options(config: BenchConfig, kind: BackendKind) -> IpmOptions:
    workers = config.threads if kind == BackendKind.PARALLEL else 1
    return IpmOptions(
        tol=config.tol,
        max_iter=config.max_iter,
        backend=BackendConfig(kind=kind, workers=workers),
    )


def _failed_row(
    case: BenchCase, n: int, kind: BackendKind, sizes: Dict[str, int], error: str
) -> BenchRow:
    return BenchRow(
        case=case.name,
        grid_size=n,
        backend=kind,
        status=SolveStatus.RESTORATION_FAILED,
        objective=float("nan"),
        iterations=0,
        wall_time=0.0,
        derivative_time=0.0,
        factorization_time=0.0,
        solve_time=0.0,
        nvar=sizes["nvar"],
        m_con=sizes["m_con"],
        nnz_kkt=0,
        nnz_l=0,
        objective_ok=False if case.expected_objective is not None else None,
        error=error,
    )


def check_grid_drift(rows: List[BenchRow], tolerance: float) -> List[BenchRow]:
    """Set ``drift_ok`` on rows whose grid size has a 4x refinement in ``rows``.

    Pairs share a backend and must both be optimal; the check is
    ``|J_N - J_4N| <= tolerance * (1 + |J_4N|)``.
    """
    optimal = {
        (r.grid_size, r.backend): r for r in rows if r.status == SolveStatus.OPTIMAL
    }
    checked = []
    for row in rows:
        fine = optimal.get((4 * row.grid_size, row.backend))
        if fine is None or row.status != SolveStatus.OPTIMAL:
            checked.append(row)
            continue
        drift = abs(row.objective - fine.objective)
        ok = bool(drift <= tolerance * (1.0 + abs(fine.objective)))
        if not ok:
            logger.warning(
                "bench_grid_drift",
                case=row.case,
                grid_size=row.grid_size,
                backend=row.backend.value,
                drift=drift,
            )
        checked.append(row.model_copy(update={"drift_ok": ok}))
    return checked


def run_case(
    case: BenchCase,
    config: BenchConfig,
    base_dir: Optional[Path] = None,
    allow_large: bool = False,
    on_row: Optional[RowCallback] = None,
) -> List[BenchRow]:
    """Rows of one case, in grid-size then backend order.

    DSL errors propagate; solver failures become rows. ``on_row`` sees each
    row as it is solved, before the grid drift check fills ``drift_ok``.
    """
    too_large = [n for n in case.grid_sizes if n > config.max_grid_size]
    if too_large and not allow_large:
        raise ValidationException(
            f"case '{case.name}': grid size {too_large[0]} exceeds the cap "
            f"{config.max_grid_size}"
        )
    problem = load_problem(case.name, case.source, base_dir)
    rows: List[BenchRow] = []
    for n in case.grid_sizes:
        nlp = transcribe(problem, scheme=case.scheme, grid_size=n)
        sizes = check_dimensions(case.name, nlp)
        for kind in case.backends:
            options = _options(config, kind)
            started = time.perf_counter()
            try:
                with get_backend(options.backend) as backend:
                    solution = solve(nlp, options, backend=backend)
            except OctransException as exc:
                logger.warning(
                    "bench_solve_failed", case=case.name, grid_size=n, error=str(exc)
                )
                row = _failed_row(case, n, kind, sizes, str(exc))
            else:
                objective_ok = None
                if case.expected_objective is not None:
                    objective_ok = bool(
                        abs(solution.objective - case.expected_objective)
                        <= case.objective_tolerance
                    )
                row = BenchRow(
                    case=case.name,
                    grid_size=n,
                    backend=kind,
                    status=solution.status,
                    objective=solution.objective,
                    iterations=solution.iterations,
                    wall_time=time.perf_counter() - started,
                    derivative_time=solution.timings.derivatives,
                    factorization_time=solution.timings.factorization,
                    solve_time=solution.timings.solves,
                    nvar=sizes["nvar"],
                    m_con=sizes["m_con"],
                    nnz_kkt=solution.counters.get("kkt_nnz", 0),
                    nnz_l=solution.counters.get("l_nnz", 0),
                    objective_ok=objective_ok,
                    error=(
                        None
                        if solution.status == SolveStatus.OPTIMAL
                        else solution.message
                    ),
                )
            logger.info(
                "bench_row",
                case=row.case,
                grid_size=n,
                backend=kind.value,
                status=row.status.value,
                objective=row.objective,
                iterations=row.iterations,
            )
            rows.append(row)
            if on_row is not None:
                on_row(row)
    if case.drift_tolerance is not None:
        rows = check_grid_drift(rows, case.drift_tolerance)
    return rows


def run_bench(
    config: BenchConfig,
    base_dir: Optional[Path] = None,
    allow_large: bool = False,
    on_row: Optional[RowCallback] = None,
) -> BenchReport:
    """Run every (case, N, backend) combination sequentially."""
    report = BenchReport()
    for case in config.cases:
        report.rows.extend(run_case(case, config, base_dir, allow_large, on_row))
    logger.info("bench_finished", rows=len(report.rows), success=report.success)
    return report


def objective_drift(report: BenchReport, case: str, backend: BackendKind) -> float:
    """Largest ``|J_N - J_finest| / (1 + |J_finest|)`` over a case's sweep."""
    rows = sorted(
        (r for r in report.rows if r.case == case and r.backend == backend),
        key=lambda r: r.grid_size,
    )
    if not rows:
        raise ValidationException(f"no rows for case '{case}'")
    finest = rows[-1].objective
    return max(abs(r.objective - finest) / (1.0 + abs(finest)) for r in rows)


def linear_fit(xs: List[float], ys: List[float]) -> Dict[str, float]:
    """Least-squares line through ``(xs, ys)`` and its worst relative residual."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 2:
        raise ValidationException("a linear fit needs at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    residual = np.max(np.abs(y - fitted) / np.maximum(np.abs(y), 1.0))
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "max_relative_residual": float(residual),
    }
