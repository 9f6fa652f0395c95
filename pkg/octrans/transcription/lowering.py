"""Lowering of problem expressions into per-index kernels."""

from dataclasses import dataclass
from typing import Dict, Tuple

from octrans.core.exceptions import InvariantViolation
from octrans.dsl.ast import (
    Binary,
    CompRef,
    Const,
    DeclKind,
    Expr,
    Instant,
    OcpProblem,
    ParamRef,
    TimeSym,
    Unary,
)
from octrans.kernels import KernelBuilder, Op, SlotInput
from octrans.kernels.expr import BINARY_OPS, UNARY_OPS

from .layout import VariableLayout, variable_slot


@dataclass(frozen=True)
class NodeContext:
    """Where running-time references of an expression point.

    ``offset`` selects grid node ``i + offset`` for the kernel index ``i``.
    Endpoint references always resolve to nodes ``0`` and ``N``.
    """

    offset: int = 0


class KernelLowering:
    """Translate AST expressions into nodes of one kernel under construction."""

    def __init__(
        self, problem: OcpProblem, layout: VariableLayout, builder: KernelBuilder
    ):
        self.problem = problem
        self.layout = layout
        self.builder = builder
        self._cache: Dict[Tuple[Expr, NodeContext], int] = {}
        self._step = -1

    # ------------------------------------------------------------------
    # Time
    # ------------------------------------------------------------------

    def time_bound(self, expr: Expr) -> int:
        return self.lower(expr, NodeContext())

    def step(self) -> int:
        """Node for ``h = (tf - t0) / N``; a constant on a fixed horizon."""
        if self._step < 0:
            b = self.builder
            span = b.binary(
                Op.SUB,
                self.time_bound(self.problem.time.tf),
                self.time_bound(self.problem.time.t0),
            )
            self._step = b.binary(Op.DIV, span, b.const(float(self.layout.grid_size)))
        return self._step

    def time(self, ctx: NodeContext) -> int:
        b = self.builder
        t0 = self.time_bound(self.problem.time.t0)
        return b.binary(Op.ADD, t0, b.binary(Op.MUL, b.index(ctx.offset), self.step()))

    # ------------------------------------------------------------------
    # Expressions
    # ------------------------------------------------------------------

    def lower(self, expr: Expr, ctx: NodeContext) -> int:
        key = (expr, ctx)
        cached = self._cache.get(key)
        if cached is None:
            cached = self._lower(expr, ctx)
            self._cache[key] = cached
        return cached

    def _lower(self, expr: Expr, ctx: NodeContext) -> int:
        b = self.builder
        if isinstance(expr, Const):
            return b.const(expr.value)
        if isinstance(expr, TimeSym):
            return self.time(ctx)
        if isinstance(expr, ParamRef):
            slot = variable_slot(self.problem, expr)
            label = self.layout.variable_labels[slot]
            return b.input(SlotInput(base=slot, stride=0, label=label))
        if isinstance(expr, CompRef):
            return b.input(self.slot_input(expr, ctx))
        if isinstance(expr, Unary):
            return b.unary(UNARY_OPS[expr.op], self.lower(expr.arg, ctx))
        if isinstance(expr, Binary):
            left = self.lower(expr.left, ctx)
            right = self.lower(expr.right, ctx)
            if expr.op == "^":
                return b.power(left, right)
            return b.binary(BINARY_OPS[expr.op], left, right)
        raise InvariantViolation(f"cannot lower expression {expr!r}")

    def slot_input(self, ref: CompRef, ctx: NodeContext) -> SlotInput:
        layout = self.layout
        comp = self.problem.slot(ref.kind, ref.decl, ref.component)
        if ref.kind == DeclKind.STATE:
            start, width = layout.state_offset, layout.n_state
            labels = layout.state_labels
        else:
            start, width = layout.control_offset, layout.n_control
            labels = layout.control_labels
        name = labels[comp]
        if ref.at == Instant.SYMBOLIC:
            suffix = "@i" if ctx.offset == 0 else f"@i+{ctx.offset}"
            return SlotInput(
                base=start + ctx.offset * width + comp,
                stride=width,
                label=name + suffix,
            )
        node = 0 if ref.at == Instant.INITIAL else layout.grid_size
        suffix = "@0" if node == 0 else "@N"
        return SlotInput(
            base=start + node * width + comp, stride=0, label=name + suffix
        )
