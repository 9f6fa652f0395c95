"""Structured NLP produced by transcription.

Constraints and objective terms are groups: one kernel mapped over a range
of grid indices. Row ``r`` of a constraint group at index ``i`` is global
row ``row_offset + (i - start) * out_dim + r``.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np

from octrans.backends import Backend, SerialBackend
from octrans.dsl.ast import DeclKind, OcpProblem
from octrans.kernels import (
    Kernel,
    KernelTape,
    eval_gradient,
    eval_hessian,
    eval_jacobian,
    eval_value,
)
from octrans.models.schemas import Scheme

from .layout import Grid, VariableLayout


class GroupKind(str, Enum):
    """Constraint group tags."""

    DYNAMICS = "dynamics"
    PATH = "path"
    BOUNDARY = "boundary"


@dataclass(eq=False)
class ConstraintGroup:
    name: str
    kind: GroupKind
    tape: KernelTape
    index_range: range
    row_offset: int
    lower: np.ndarray  # per output row
    upper: np.ndarray
    source_line: int = 0

    @property
    def kernel(self) -> Kernel:
        return self.tape.kernel

    @property
    def out_dim(self) -> int:
        return self.kernel.out_dim

    @property
    def rows(self) -> int:
        return self.out_dim * len(self.index_range)

    @property
    def jac_nnz(self) -> int:
        return self.tape.pattern.jac_nnz * len(self.index_range)

    @property
    def hess_nnz(self) -> int:
        return self.tape.pattern.hess_nnz * len(self.index_range)

    @cached_property
    def jac_structure(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.tape.pattern.jacobian_coo(
            self.kernel, self.index_range, self.row_offset
        )

    @cached_property
    def hess_structure(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.tape.pattern.hessian_coo(self.kernel, self.index_range)


@dataclass(eq=False)
class ObjectiveGroup:
    """``sum_i weights[i - start] * kernel(i)`` over the index range."""

    name: str
    tape: KernelTape
    index_range: range
    weights: np.ndarray

    @property
    def kernel(self) -> Kernel:
        return self.tape.kernel

    @property
    def hess_nnz(self) -> int:
        return self.tape.pattern.hess_nnz * len(self.index_range)

    @cached_property
    def slots(self) -> np.ndarray:
        """Global slot of every kernel input per index, shape ``(L, K)``."""
        idx = np.arange(self.index_range.start, self.index_range.stop)
        return self.kernel.slot_matrix(idx).T

    @cached_property
    def hess_structure(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.tape.pattern.hessian_coo(self.kernel, self.index_range)


@dataclass(eq=False)
class StructuredNlp:
    """Flat-vector NLP ``min f(x) s.t. lcon <= c(x) <= ucon, lvar <= x <= uvar``.

    ``objective_sign`` is ``-1`` for problems stated with ``max``; the
    stored objective is always minimized.
    """

    name: str
    scheme: Scheme
    problem: OcpProblem
    layout: VariableLayout
    grid: Grid
    constraint_groups: Tuple[ConstraintGroup, ...]
    objective_groups: Tuple[ObjectiveGroup, ...]
    lvar: np.ndarray
    uvar: np.ndarray
    x_start: np.ndarray
    pinned: np.ndarray  # slots whose bounds follow the start value
    objective_sign: float = 1.0
    box_rows: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    # ------------------------------------------------------------------
    # Dimensions and structure
    # ------------------------------------------------------------------

    @property
    def grid_size(self) -> int:
        return self.layout.grid_size

    @property
    def nvar(self) -> int:
        return self.layout.nvar

    @property
    def m_con(self) -> int:
        return sum(g.rows for g in self.constraint_groups)

    @cached_property
    def lcon(self) -> np.ndarray:
        return self._row_bounds("lower")

    @cached_property
    def ucon(self) -> np.ndarray:
        return self._row_bounds("upper")

    def _row_bounds(self, which: str) -> np.ndarray:
        out = np.empty(self.m_con)
        for g in self.constraint_groups:
            values = getattr(g, which)
            out[g.row_offset : g.row_offset + g.rows] = np.tile(
                values, len(g.index_range)
            )
        return out

    @property
    def jac_nnz(self) -> int:
        return sum(g.jac_nnz for g in self.constraint_groups)

    @property
    def hess_nnz(self) -> int:
        return sum(g.hess_nnz for g in self.constraint_groups) + sum(
            g.hess_nnz for g in self.objective_groups
        )

    @cached_property
    def jac_structure(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates of the Jacobian values returned by :meth:`jacobian`."""
        parts = [g.jac_structure for g in self.constraint_groups]
        return _concat(parts)

    @cached_property
    def hess_structure(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates of the Hessian values returned by :meth:`hessian`.

        Pairs are unordered; each represents a symmetric entry.
        """
        parts = [g.hess_structure for g in self.constraint_groups]
        parts += [g.hess_structure for g in self.objective_groups]
        return _concat(parts)

    def with_start(self, x_start: np.ndarray) -> "StructuredNlp":
        """Copy with a new start point; pinned slots get bounds equal to it."""
        lvar = self.lvar.copy()
        uvar = self.uvar.copy()
        lvar[self.pinned] = x_start[self.pinned]
        uvar[self.pinned] = x_start[self.pinned]
        return dataclasses.replace(self, x_start=x_start, lvar=lvar, uvar=uvar)

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def evaluate_constraints(
        self,
        x: np.ndarray,
        backend: Optional[Backend] = None,
        out: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        backend = backend or _default_backend()
        out = np.empty(self.m_con) if out is None else out
        for g in self.constraint_groups:
            segment = out[g.row_offset : g.row_offset + g.rows]
            start = g.index_range.start
            backend.par_map(
                lambda chunk, g=g, seg=segment, s=start: eval_value(
                    g.tape, x, chunk, seg, s
                ),
                g.index_range,
            )
        return out

    def objective(self, x: np.ndarray, backend: Optional[Backend] = None) -> float:
        backend = backend or _default_backend()
        total = 0.0
        for g in self.objective_groups:
            start = g.index_range.start

            def partial(chunk: range, g: ObjectiveGroup = g, s: int = start) -> float:
                idx = np.arange(chunk.start, chunk.stop)
                values = g.tape.values(x, idx)[:, 0]
                weights = g.weights[chunk.start - s : chunk.stop - s]
                return float(np.sum(weights * values))

            total += backend.par_reduce(partial, g.index_range)
        return total

    def gradient(
        self,
        x: np.ndarray,
        backend: Optional[Backend] = None,
        out: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        backend = backend or _default_backend()
        out = np.zeros(self.nvar) if out is None else out
        out.fill(0.0)
        for g in self.objective_groups:
            adjoints = np.empty((len(g.index_range), g.kernel.n_inputs))
            weights = g.weights[:, None]
            start = g.index_range.start
            backend.par_map(
                lambda chunk, g=g, buf=adjoints, w=weights, s=start: eval_gradient(
                    g.tape, x, w, chunk, buf, s
                ),
                g.index_range,
            )
            # sequential scatter keeps the summation order fixed
            np.add.at(out, g.slots.reshape(-1), adjoints.reshape(-1))
        return out

    def jacobian(
        self,
        x: np.ndarray,
        backend: Optional[Backend] = None,
        out: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Jacobian values in :attr:`jac_structure` order."""
        backend = backend or _default_backend()
        out = np.empty(self.jac_nnz) if out is None else out
        offset = 0
        for g in self.constraint_groups:
            segment = out[offset : offset + g.jac_nnz]
            start = g.index_range.start
            backend.par_map(
                lambda chunk, g=g, seg=segment, s=start: eval_jacobian(
                    g.tape, x, chunk, seg, s
                ),
                g.index_range,
            )
            offset += g.jac_nnz
        return out

    def hessian(
        self,
        x: np.ndarray,
        multipliers: np.ndarray,
        objective_weight: float = 1.0,
        backend: Optional[Backend] = None,
        out: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Lower-triangle values of ``sigma * H_f + sum_r y_r H_c_r``."""
        backend = backend or _default_backend()
        out = np.empty(self.hess_nnz) if out is None else out
        offset = 0
        for g in self.constraint_groups:
            segment = out[offset : offset + g.hess_nnz]
            if g.hess_nnz:
                block = multipliers[g.row_offset : g.row_offset + g.rows]
                weights = block.reshape(len(g.index_range), g.out_dim)
                self._map_hessian(backend, g.tape, g.index_range, x, weights, segment)
            offset += g.hess_nnz
        for og in self.objective_groups:
            segment = out[offset : offset + og.hess_nnz]
            if og.hess_nnz:
                weights = (objective_weight * og.weights)[:, None]
                self._map_hessian(backend, og.tape, og.index_range, x, weights, segment)
            offset += og.hess_nnz
        return out

    @staticmethod
    def _map_hessian(
        backend: Backend,
        tape: KernelTape,
        index_range: range,
        x: np.ndarray,
        weights: np.ndarray,
        segment: np.ndarray,
    ) -> None:
        start = index_range.start
        backend.par_map(
            lambda chunk: eval_hessian(tape, x, weights, chunk, segment, start),
            index_range,
        )

    # ------------------------------------------------------------------
    # Reporting
    # ------------------------------------------------------------------

    def unpack(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        """Split ``x`` per declaration.

        Trajectories have shape ``(N + 1, dim)`` (``(N + 1,)`` for scalars);
        variables are flat arrays.
        """
        layout = self.layout
        result: Dict[str, np.ndarray] = {}
        blocks = {
            DeclKind.STATE: layout.states(x),
            DeclKind.CONTROL: layout.controls(x),
        }
        offsets = {DeclKind.STATE: 0, DeclKind.CONTROL: 0, DeclKind.VARIABLE: 0}
        for decl in self.problem.decls:
            lo = offsets[decl.kind]
            offsets[decl.kind] += decl.dim
            if decl.kind == DeclKind.VARIABLE:
                result[decl.name] = layout.variables(x)[lo : lo + decl.dim].copy()
            else:
                block = blocks[decl.kind][:, lo : lo + decl.dim].copy()
                result[decl.name] = block[:, 0] if decl.dim == 1 else block
        return result

    def time_grid(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        """Node times at ``x`` (the start point by default)."""
        return self.grid.times(self.x_start if x is None else x)

    def size_summary(self) -> Dict[str, int]:
        """Dimensions; ``checked_size`` also counts declared box rows."""
        finite = np.isfinite(self.lvar) | np.isfinite(self.uvar)
        return {
            "grid_size": self.grid_size,
            "nvar": self.nvar,
            "m_con": self.m_con,
            "box_rows": self.box_rows,
            "bounded_slots": int(np.count_nonzero(finite)),
            "checked_size": self.nvar + self.m_con + self.box_rows,
            "jac_nnz": self.jac_nnz,
            "hess_nnz": self.hess_nnz,
        }

    def dump(self) -> Dict[str, Any]:
        """JSON-compatible description: layout, kernels in prefix form, bounds."""
        layout = self.layout
        return {
            "name": self.name,
            "scheme": self.scheme.value,
            "grid_size": self.grid_size,
            "nvar": self.nvar,
            "m_con": self.m_con,
            "objective_sign": self.objective_sign,
            "layout": {
                "slabs": {k: list(v) for k, v in layout.slabs().items()},
                "states": list(layout.state_labels),
                "controls": list(layout.control_labels),
                "variables": list(layout.variable_labels),
            },
            "constraint_groups": [
                {
                    "name": g.name,
                    "kind": g.kind.value,
                    "range": [g.index_range.start, g.index_range.stop],
                    "row_offset": g.row_offset,
                    "out_dim": g.out_dim,
                    "lower": [_json_float(v) for v in g.lower],
                    "upper": [_json_float(v) for v in g.upper],
                    "kernel": [g.kernel.prefix(r) for r in range(g.out_dim)],
                    "stencil": [inp.label for inp in g.kernel.inputs],
                    "jac_stencil_nnz": g.tape.pattern.jac_nnz,
                    "hess_stencil_nnz": g.tape.pattern.hess_nnz,
                }
                for g in self.constraint_groups
            ],
            "objective_groups": [
                {
                    "name": g.name,
                    "range": [g.index_range.start, g.index_range.stop],
                    "weights": _weight_summary(g.weights),
                    "kernel": g.kernel.prefix(0),
                    "stencil": [inp.label for inp in g.kernel.inputs],
                    "hess_stencil_nnz": g.tape.pattern.hess_nnz,
                }
                for g in self.objective_groups
            ],
            "bounds": {
                "lvar": [_json_float(v) for v in self.lvar],
                "uvar": [_json_float(v) for v in self.uvar],
                "pinned": [int(i) for i in np.flatnonzero(self.pinned)],
            },
        }


def _concat(parts) -> Tuple[np.ndarray, np.ndarray]:
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy()
    rows = np.concatenate([p[0] for p in parts]).astype(np.int64)
    cols = np.concatenate([p[1] for p in parts]).astype(np.int64)
    return rows, cols


def _json_float(value: float) -> Any:
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return float(value)


def _weight_summary(weights: np.ndarray) -> Dict[str, Any]:
    if len(weights) == 0:
        return {"first": None, "interior": None, "last": None}
    interior = float(weights[1]) if len(weights) > 2 else None
    return {
        "first": float(weights[0]),
        "interior": interior,
        "last": float(weights[-1]),
    }


_SERIAL: Optional[SerialBackend] = None


def _default_backend() -> Backend:
    global _SERIAL
    if _SERIAL is None:
        _SERIAL = SerialBackend()
    return _SERIAL
