"""Bench report renderers: CSV, markdown, terminal table and gnuplot data."""

import csv
import io
import math
from typing import Dict, List, Tuple

from rich.table import Table

from octrans.models.schemas import BenchReport, BenchRow

COLUMNS: Tuple[str, ...] = (
    "case",
    "grid_size",
    "backend",
    "status",
    "objective",
    "iterations",
    "wall_time",
    "derivative_time",
    "factorization_time",
    "solve_time",
    "nvar",
    "m_con",
    "nnz_kkt",
    "nnz_l",
    "objective_ok",
    "drift_ok",
)

# Columns that change from run to run.
TIMING_COLUMNS = frozenset(
    {"wall_time", "derivative_time", "factorization_time", "solve_time"}
)
TEXT_COLUMNS = frozenset({"case", "backend", "status", "objective_ok", "drift_ok"})


def _cell(row: BenchRow, column: str) -> str:
    value = getattr(row, column)
    if value is None:
        return ""
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if column == "objective":
            return "nan" if math.isnan(value) else f"{value:.10g}"
        return f"{value:.4f}"
    return str(value)


def _cells(report: BenchReport, columns: Tuple[str, ...]) -> List[List[str]]:
    return [[_cell(row, c) for c in columns] for row in report.rows]


def render_csv(report: BenchReport, include_timings: bool = True) -> str:
    columns = _columns(include_timings)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(_cells(report, columns))
    return buffer.getvalue()


def render_markdown(report: BenchReport, include_timings: bool = True) -> str:
    """Pipe table with every column padded to its widest cell."""
    columns = _columns(include_timings)
    body = _cells(report, columns)
    widths = [
        max([len(c)] + [len(cells[i]) for cells in body])
        for i, c in enumerate(columns)
    ]

    def line(cells: List[str]) -> str:
        padded = (cell.ljust(w) for cell, w in zip(cells, widths))
        return "| " + " | ".join(padded) + " |"

    rule = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(list(columns)), rule] + [line(c) for c in body]) + "\n"


def rich_table(report: BenchReport, title: str = "octrans bench") -> Table:
    table = Table(title=title)
    for column in COLUMNS:
        numeric = column not in TEXT_COLUMNS
        table.add_column(column, justify="right" if numeric else "left")
    for row in report.rows:
        style = None if row.status.value == "optimal" else "red"
        table.add_row(*(_cell(row, c) for c in COLUMNS), style=style)
    return table


def render_gnuplot(report: BenchReport) -> str:
    """Wall time against N, one data block per (case, backend).

    Blocks are separated by two blank lines so gnuplot's ``index`` selects
    them.
    """
    series: Dict[Tuple[str, str], List[BenchRow]] = {}
    for row in report.rows:
        series.setdefault((row.case, row.backend.value), []).append(row)
    blocks = []
    for (case, backend), rows in series.items():
        lines = [f"# {case} {backend}", "# N wall_time iterations nnz_kkt"]
        for row in sorted(rows, key=lambda r: r.grid_size):
            lines.append(
                f"{row.grid_size} {row.wall_time:.6f} {row.iterations} {row.nnz_kkt}"
            )
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + ("\n" if blocks else "")


def _columns(include_timings: bool) -> Tuple[str, ...]:
    if include_timings:
        return COLUMNS
    return tuple(c for c in COLUMNS if c not in TIMING_COLUMNS)
