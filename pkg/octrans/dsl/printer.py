"""Canonical DSL text for an :class:`OcpProblem`.

``parse_ocp(pretty_print(p)) == p`` holds for every parsed problem: constants
are printed as ``repr`` literals, parentheses are emitted exactly where the
grammar needs them, and max costs are printed with their sign restored.
"""

import math
from typing import List, Sequence

from .ast import (
    Binary,
    CompRef,
    Const,
    ConstraintDecl,
    DeclKind,
    Expr,
    Instant,
    OcpProblem,
    ParamRef,
    Sense,
    TimeSym,
    Unary,
    VarDecl,
    negate,
    walk,
)

_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5
_PRECEDENCE = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}


def format_number(value: float) -> str:
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return repr(float(value))


class _Printer:
    def __init__(self, problem: OcpProblem):
        self.problem = problem
        self.decls = {d.name: d for d in problem.decls}

    def precedence(self, expr: Expr) -> int:
        if isinstance(expr, Const):
            return _UNARY if math.copysign(1.0, expr.value) < 0 else _ATOM
        if isinstance(expr, Unary):
            return _UNARY if expr.op == "neg" else _ATOM
        if isinstance(expr, Binary):
            return _PRECEDENCE[expr.op]
        return _ATOM

    def wrap(self, expr: Expr, minimum: int) -> str:
        text = self.expr(expr)
        return f"({text})" if self.precedence(expr) < minimum else text

    def expr(self, expr: Expr) -> str:
        if isinstance(expr, Const):
            return format_number(expr.value)
        if isinstance(expr, TimeSym):
            return self.problem.time.name
        if isinstance(expr, ParamRef):
            return self.decls[expr.decl].component_label(expr.component)
        if isinstance(expr, CompRef):
            label = self.decls[expr.decl].component_label(expr.component)
            return f"{label}({self.instant(expr.at)})"
        if isinstance(expr, Unary):
            if expr.op == "neg":
                return "-" + self.wrap(expr.arg, _UNARY)
            return f"{expr.op}({self.expr(expr.arg)})"
        if isinstance(expr, Binary):
            if expr.op == "^":
                # right associative; the exponent may carry a sign
                left = self.wrap(expr.left, _ATOM)
                right = self.wrap(expr.right, _UNARY)
            else:
                prec = _PRECEDENCE[expr.op]
                left = self.wrap(expr.left, prec)
                right = self.wrap(expr.right, prec + 1)
            return f"{left} {expr.op} {right}"
        raise TypeError(f"cannot print {expr!r}")

    def instant(self, at: Instant) -> str:
        time = self.problem.time
        if at == Instant.SYMBOLIC:
            return time.name
        return self.expr(time.t0 if at == Instant.INITIAL else time.tf)

    def bound(self, values: Sequence[float]) -> str:
        if len(values) == 1:
            return format_number(values[0])
        return "[" + ", ".join(format_number(v) for v in values) + "]"

    def declaration(self, decl: VarDecl) -> str:
        space = "R" if decl.dim == 1 else f"R^{decl.dim}"
        name = decl.name
        if decl.component_names is not None:
            name = f"{name} = ({', '.join(decl.component_names)})"
        return f"{name} in {space}, {decl.kind.value}"

    def time_line(self) -> str:
        time = self.problem.time
        return f"{time.name} in [{self.expr(time.t0)}, {self.expr(time.tf)}], time"

    def constraint_body(self, constraint: ConstraintDecl) -> str:
        exprs = constraint.exprs
        first = exprs[0]
        if len(exprs) > 1 and isinstance(first, (CompRef, ParamRef)):
            decl = self.decls[first.decl]
            whole = [
                CompRef(first.kind, decl.name, i, first.at)
                if isinstance(first, CompRef)
                else ParamRef(decl.name, i)
                for i in range(decl.dim)
            ]
            if list(exprs) == whole:
                if isinstance(first, CompRef):
                    return f"{decl.name}({self.instant(first.at)})"
                return decl.name
        if len(exprs) > 1:
            raise TypeError("multi-row constraints must cover one whole declaration")
        return self.expr(first)

    def constraint(self, constraint: ConstraintDecl) -> str:
        body = self.constraint_body(constraint)
        lower, upper = constraint.lower, constraint.upper
        if constraint.is_equality:
            return f"{body} == {self.bound(upper)}"
        if all(v == -math.inf for v in lower):
            return f"{body} <= {self.bound(upper)}"
        if all(v == math.inf for v in upper):
            return f"{body} >= {self.bound(lower)}"
        return f"{self.bound(lower)} <= {body} <= {self.bound(upper)}"

    def dynamics(self, equation: ConstraintDecl) -> str:
        assert equation.component is not None
        offset = equation.component
        for decl in self.problem.decls_of(DeclKind.STATE):
            if offset < decl.dim:
                label = decl.component_label(offset)
                break
            offset -= decl.dim
        time = self.problem.time.name
        return f"derivative({label})({time}) == {self.expr(equation.exprs[0])}"

    def cost(self) -> str:
        cost = self.problem.cost
        mayer, lagrange = cost.mayer, cost.lagrange
        if cost.sense == Sense.MAX:
            mayer = negate(mayer) if mayer is not None else None
            lagrange = negate(lagrange) if lagrange is not None else None
        terms: List[str] = []
        if mayer is not None:
            terms.append(self.expr(mayer))
        if lagrange is not None:
            terms.append(f"integral({self.expr(lagrange)})")
        return f"{' + '.join(terms)} => {cost.sense.value}"

    def document(self) -> str:
        problem = self.problem
        time_refs = {
            node.decl
            for bound in (problem.time.t0, problem.time.tf)
            for node in walk(bound)
            if isinstance(node, ParamRef)
        }
        lines: List[str] = []
        time_pending = True
        if not time_refs:
            lines.append(self.time_line())
            time_pending = False
        for decl in problem.decls:
            lines.append(self.declaration(decl))
            time_refs.discard(decl.name)
            if time_pending and not time_refs:
                lines.append(self.time_line())
                time_pending = False
        lines.append("")
        lines.extend(self.constraint(c) for c in problem.constraints)
        if problem.constraints:
            lines.append("")
        lines.extend(self.dynamics(d) for d in problem.dynamics)
        lines.append("")
        lines.append(self.cost())
        return "\n".join(lines) + "\n"


def pretty_print(problem: OcpProblem) -> str:
    """Emit canonical DSL text for ``problem``."""
    return _Printer(problem).document()
