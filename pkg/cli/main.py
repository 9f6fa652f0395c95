"""octrans command-line interface."""

from collections import Counter
from pathlib import Path
from typing import Callable, Optional, TypeVar

import typer
from pydantic import ValidationError
from rich.console import Console

from octrans.bench import (
    available_problems,
    default_bench_config,
    load_bench_config,
    problem_source,
    render_csv,
    render_gnuplot,
    render_markdown,
    resolve_base_dir,
    rich_table,
    run_bench,
)
from octrans.core.config import Settings, get_settings
from octrans.core.exceptions import DslException, OctransException
from octrans.core.logging import configure_logging
from octrans.dsl import OcpProblem, parse_ocp, pretty_print
from octrans.ipm import solve as ipm_solve
from octrans.models.schemas import (
    BackendConfig,
    BackendKind,
    IpmOptions,
    Scheme,
    SolveStatus,
)
from octrans.transcription import transcribe

app = typer.Typer(
    name="octrans",
    help="Transcribe and solve optimal control problems written in the OCP DSL.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console(highlight=False)

T = TypeVar("T")

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2


def _guarded(action: Callable[[], T]) -> T:
    """Run ``action``, turning octrans errors into a message and exit code."""
    try:
        return action()
    except DslException as exc:
        typer.echo(str(exc), err=True)
        raise typer.Exit(EXIT_INPUT) from exc
    except OctransException as exc:
        typer.echo(f"error: {exc.message}", err=True)
        raise typer.Exit(exc.exit_code) from exc


def _read_problem(target: str) -> OcpProblem:
    """Parse ``target``: an ``.ocp`` path, or the name of a bundled problem."""
    path = Path(target)
    if path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            typer.echo(f"error: cannot read {path}: {exc.strerror}", err=True)
            raise typer.Exit(EXIT_INPUT) from exc
        return _guarded(lambda: parse_ocp(text, name=path.stem))
    if target in available_problems():
        return _guarded(lambda: parse_ocp(problem_source(target), name=target))
    typer.echo(f"error: no such file: {target}", err=True)
    raise typer.Exit(EXIT_INPUT)


def _solver_options(
    settings: Settings,
    backend: Optional[BackendKind],
    threads: Optional[int],
    tol: Optional[float],
    max_iter: Optional[int],
    verbose: bool,
) -> IpmOptions:
    kind = backend or settings.backend
    workers = (threads or settings.threads) if kind == BackendKind.PARALLEL else 1
    update = {
        "backend": BackendConfig(
            kind=kind, workers=workers, chunk_size=settings.chunk_size
        ),
        "verbose": verbose,
    }
    if tol is not None:
        update["tol"] = tol
    if max_iter is not None:
        update["max_iter"] = max_iter
    return settings.ipm_options.model_copy(update=update)


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="DEBUG, INFO, WARNING or ERROR"
    ),
    log_format: Optional[str] = typer.Option(None, "--log-format", help="json|console"),
) -> None:
    settings = get_settings()
    overrides = {}
    if log_level:
        overrides["log_level"] = log_level.upper()
    if log_format:
        overrides["log_format"] = log_format.lower()
    if overrides:
        try:
            settings = Settings(**{**settings.model_dump(), **overrides})
        except ValidationError as exc:
            typer.echo(f"error: {exc.errors()[0]['msg']}", err=True)
            raise typer.Exit(EXIT_INPUT) from exc
    configure_logging(settings)


@app.command()
def solve(
    problem_file: str = typer.Argument(..., help="Path to an .ocp file"),
    scheme: Optional[Scheme] = typer.Option(None, "--scheme", help="euler|trapezoid"),
    grid_size: Optional[int] = typer.Option(None, "--grid-size", "-N", min=1),
    backend: Optional[BackendKind] = typer.Option(None, "--backend"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1),
    tol: Optional[float] = typer.Option(None, "--tol"),
    max_iter: Optional[int] = typer.Option(None, "--max-iter", min=1),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Iteration log"),
    json_out: Optional[Path] = typer.Option(
        None, "--json", help="Write the full solution report here"
    ),
) -> None:
    """Transcribe PROBLEM_FILE and solve it with the interior-point method."""
    settings = get_settings()
    problem = _read_problem(problem_file)
    options = _solver_options(settings, backend, threads, tol, max_iter, verbose)
    nlp = _guarded(
        lambda: transcribe(
            problem,
            scheme=scheme or settings.scheme,
            grid_size=grid_size or settings.grid_size,
        )
    )
    solution = _guarded(lambda: ipm_solve(nlp, options))

    console.print(f"problem      {problem.name}")
    console.print(f"scheme       {nlp.scheme.value}, N = {nlp.grid_size}")
    console.print(f"size         nvar = {nlp.nvar}, m_con = {nlp.m_con}")
    console.print(f"status       {solution.status.value}")
    console.print(f"objective    {solution.objective:.12g}")
    console.print(f"iterations   {solution.iterations}")
    console.print(f"wall time    {solution.timings.total:.3f} s")
    if solution.message:
        console.print(f"message      {solution.message}", markup=False)

    if json_out is not None:
        json_out.write_text(solution.model_dump_json(indent=2), encoding="utf-8")
    if solution.status != SolveStatus.OPTIMAL:
        raise typer.Exit(EXIT_SOLVER)


@app.command()
def check(
    problem_file: str = typer.Argument(..., help="Path to an .ocp file"),
    canonical: bool = typer.Option(
        False, "--canonical", help="Print the problem in canonical form"
    ),
) -> None:
    """Parse and validate PROBLEM_FILE without solving it."""
    problem = _read_problem(problem_file)
    kinds = Counter(c.kind.value for c in problem.constraints)
    rows: Counter = Counter()
    for c in problem.constraints:
        rows[c.kind.value] += c.rows
    console.print(f"problem      {problem.name}")
    horizon = "free" if problem.has_free_horizon else "fixed"
    console.print(f"time         {problem.time.name} ({horizon} horizon)")
    console.print(
        f"dimensions   states = {problem.state_dim}, "
        f"controls = {problem.control_dim}, variables = {problem.variable_dim}"
    )
    for kind in sorted(kinds):
        console.print(f"{kind:<12} {kinds[kind]} line(s), {rows[kind]} row(s)")
    cost = problem.cost
    terms = [
        name
        for name, term in (("endpoint", cost.mayer), ("integral", cost.lagrange))
        if term is not None
    ]
    console.print(f"cost         {' + '.join(terms)} => {cost.sense.value}")
    if canonical:
        typer.echo(pretty_print(problem), nl=False)


@app.command()
def bench(
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", help="TOML sweep description"
    ),
    csv_out: Optional[Path] = typer.Option(None, "--csv", help="Write rows as CSV"),
    markdown_out: Optional[Path] = typer.Option(
        None, "--markdown", help="Write rows as a markdown table"
    ),
    gnuplot_out: Optional[Path] = typer.Option(
        None, "--gnuplot", help="Write time-vs-N data blocks"
    ),
    allow_large: bool = typer.Option(
        False, "--allow-large", help="Permit grid sizes above the configured cap"
    ),
) -> None:
    """Run the benchmark sweep; exit 0 iff every solve is optimal and checked."""
    bench_config = _guarded(
        lambda: load_bench_config(config) if config else default_bench_config()
    )
    report = _guarded(
        lambda: run_bench(
            bench_config, base_dir=resolve_base_dir(config), allow_large=allow_large
        )
    )
    console.print(rich_table(report))
    if csv_out is not None:
        csv_out.write_text(render_csv(report), encoding="utf-8")
    if markdown_out is not None:
        markdown_out.write_text(render_markdown(report), encoding="utf-8")
    if gnuplot_out is not None:
        gnuplot_out.write_text(render_gnuplot(report), encoding="utf-8")
    if not report.success:
        raise typer.Exit(EXIT_SOLVER)


@app.command()
def problems() -> None:
    """List the bundled benchmark problems."""
    for name in available_problems():
        typer.echo(name)


if __name__ == "__main__":
    app()
