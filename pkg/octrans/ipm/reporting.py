"""Human-readable iteration log."""

from dataclasses import dataclass
from math import log10
from typing import Optional

from rich.console import Console


@dataclass(frozen=True)
class IterationInfo:
    """One accepted (or attempted) interior-point iteration."""

    iteration: int
    objective: float
    theta: float
    inf_du: float
    mu: float
    alpha_primal: float
    alpha_dual: float
    delta_w: float
    trials: int


_HEADER = (
    f"{'iter':>5} {'objective':>15} {'inf_pr':>9} {'inf_du':>9} {'lg(mu)':>6} "
    f"{'lg(rg)':>6} {'alpha_du':>9} {'alpha_pr':>9} {'ls':>3}"
)


def _lg(value: float) -> str:
    if value <= 0.0:
        return "-"
    return f"{log10(value):.1f}"


class IterationTable:
    """Prints one line per iteration, with a header every 10 lines."""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console(highlight=False)
        self._lines = 0

    def __call__(self, info: IterationInfo) -> None:
        if self._lines % 10 == 0:
            self.console.print(_HEADER, style="bold")
        self._lines += 1
        self.console.print(
            f"{info.iteration:>5d} {info.objective:>15.8e} {info.theta:>9.2e} "
            f"{info.inf_du:>9.2e} {_lg(info.mu):>6} {_lg(info.delta_w):>6} "
            f"{info.alpha_dual:>9.2e} {info.alpha_primal:>9.2e} {info.trials:>3d}"
        )
