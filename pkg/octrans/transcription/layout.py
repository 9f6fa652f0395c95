"""Flat decision-vector layout and time grid."""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from octrans.dsl.ast import Const, DeclKind, Expr, OcpProblem, ParamRef


@dataclass(frozen=True)
class VariableLayout:
    """Slabs of the decision vector.

    Free variables come first, then states node-major (all components of
    node 0, then node 1, ...), then controls node-major. Controls exist on
    all ``N + 1`` nodes for every scheme.
    """

    n_state: int
    n_control: int
    n_variable: int
    grid_size: int
    state_labels: Tuple[str, ...]
    control_labels: Tuple[str, ...]
    variable_labels: Tuple[str, ...]

    @classmethod
    def for_problem(cls, problem: OcpProblem, grid_size: int) -> "VariableLayout":
        def labels(kind: DeclKind) -> Tuple[str, ...]:
            return tuple(
                d.component_label(i)
                for d in problem.decls_of(kind)
                for i in range(d.dim)
            )

        return cls(
            n_state=problem.state_dim,
            n_control=problem.control_dim,
            n_variable=problem.variable_dim,
            grid_size=grid_size,
            state_labels=labels(DeclKind.STATE),
            control_labels=labels(DeclKind.CONTROL),
            variable_labels=labels(DeclKind.VARIABLE),
        )

    @property
    def nodes(self) -> int:
        return self.grid_size + 1

    @property
    def state_offset(self) -> int:
        return self.n_variable

    @property
    def control_offset(self) -> int:
        return self.n_variable + self.n_state * self.nodes

    @property
    def nvar(self) -> int:
        return self.control_offset + self.n_control * self.nodes

    def variable_slot(self, component: int) -> int:
        return component

    def state_slot(self, component: int, node: int) -> int:
        return self.state_offset + node * self.n_state + component

    def control_slot(self, component: int, node: int) -> int:
        return self.control_offset + node * self.n_control + component

    def slabs(self) -> Dict[str, Tuple[int, int]]:
        """``[start, stop)`` of each slab."""
        return {
            "variable": (0, self.state_offset),
            "state": (self.state_offset, self.control_offset),
            "control": (self.control_offset, self.nvar),
        }

    def slot_label(self, slot: int) -> str:
        if slot < self.state_offset:
            return self.variable_labels[slot]
        if slot < self.control_offset:
            node, comp = divmod(slot - self.state_offset, self.n_state)
            return f"{self.state_labels[comp]}@{node}"
        node, comp = divmod(slot - self.control_offset, self.n_control)
        return f"{self.control_labels[comp]}@{node}"

    def states(self, x: np.ndarray) -> np.ndarray:
        """State values, shape ``(N + 1, n_state)``."""
        block = x[self.state_offset : self.control_offset]
        return block.reshape(self.nodes, self.n_state)

    def controls(self, x: np.ndarray) -> np.ndarray:
        """Control values, shape ``(N + 1, n_control)``."""
        return x[self.control_offset : self.nvar].reshape(self.nodes, self.n_control)

    def variables(self, x: np.ndarray) -> np.ndarray:
        return x[: self.state_offset]


def variable_slot(problem: OcpProblem, ref: ParamRef) -> int:
    """Slot of a free-variable component (variables lead the vector)."""
    return problem.slot(DeclKind.VARIABLE, ref.decl, ref.component)


@dataclass(frozen=True)
class TimeBound:
    """An end of the horizon: a constant or a free-variable slot."""

    value: float = 0.0
    slot: Optional[int] = None

    @classmethod
    def from_expr(cls, problem: OcpProblem, expr: Expr) -> "TimeBound":
        if isinstance(expr, Const):
            return cls(value=expr.value)
        if isinstance(expr, ParamRef):
            return cls(slot=variable_slot(problem, expr))
        raise TypeError(f"unsupported time bound {expr!r}")

    def at(self, x: np.ndarray) -> float:
        return self.value if self.slot is None else float(x[self.slot])


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_j = t0 + j * h`` with ``h = (tf - t0) / N``."""

    grid_size: int
    t0: TimeBound
    tf: TimeBound

    @property
    def is_fixed(self) -> bool:
        return self.t0.slot is None and self.tf.slot is None

    def step(self, x: np.ndarray) -> float:
        return (self.tf.at(x) - self.t0.at(x)) / self.grid_size

    def times(self, x: np.ndarray) -> np.ndarray:
        return self.t0.at(x) + self.step(x) * np.arange(self.grid_size + 1)
