"""AST of a validated optimal control problem.

Nodes are frozen dataclasses so two problems compare structurally with
``==``. Source line numbers are carried for error reporting but excluded
from comparison.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Tuple, Union


class Instant(str, Enum):
    """Time argument of a component reference."""

    SYMBOLIC = "t"
    INITIAL = "t0"
    FINAL = "tf"


class DeclKind(str, Enum):
    """Kinds of declared quantities."""

    STATE = "state"
    CONTROL = "control"
    VARIABLE = "variable"


class ConstraintKind(str, Enum):
    """Constraint classification after semantic analysis."""

    BOUNDARY = "boundary"
    PATH = "path"
    BOX_STATE = "box_state"
    BOX_CONTROL = "box_control"
    BOX_VARIABLE = "box_variable"
    DYNAMICS = "dynamics"


class Sense(str, Enum):
    """Optimization sense as written in the source."""

    MIN = "min"
    MAX = "max"


UNARY_FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
BINARY_OPERATORS = ("+", "-", "*", "/", "^")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class TimeSym:
    """The symbolic running time."""


@dataclass(frozen=True)
class ParamRef:
    """Component of a declared ``variable`` (a finite-dimensional unknown)."""

    decl: str
    component: int


@dataclass(frozen=True)
class CompRef:
    """Component of a state or control evaluated at a time argument."""

    kind: DeclKind
    decl: str
    component: int
    at: Instant


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of BINARY_OPERATORS
    left: "Expr"
    right: "Expr"


Expr = Union[Const, TimeSym, ParamRef, CompRef, Unary, Binary]


def negate(expr: Expr) -> Expr:
    """Negate with folding; ``negate(negate(e)) == e`` for every ``e``."""
    if isinstance(expr, Const):
        return Const(-expr.value)
    if isinstance(expr, Unary) and expr.op == "neg":
        return expr.arg
    return Unary("neg", expr)


def fold_binary(op: str, left: Expr, right: Expr) -> Expr:
    """Build a binary node, folding constant operands."""
    if isinstance(left, Const) and isinstance(right, Const):
        a, b = left.value, right.value
        if op == "+":
            return Const(a + b)
        if op == "-":
            return Const(a - b)
        if op == "*":
            return Const(a * b)
        if op == "/" and b != 0.0:
            return Const(a / b)
        integral_power = float(b).is_integer() and not (a == 0.0 and b < 0.0)
        if op == "^" and (a > 0.0 or integral_power):
            return Const(a**b)
    return Binary(op, left, right)


def fold_unary(op: str, arg: Expr) -> Expr:
    """Build a unary node, folding constant operands."""
    if op == "neg":
        return negate(arg)
    if isinstance(arg, Const):
        v = arg.value
        if op == "sin":
            return Const(math.sin(v))
        if op == "cos":
            return Const(math.cos(v))
        if op == "tan":
            return Const(math.tan(v))
        if op == "exp" and v < 700.0:
            return Const(math.exp(v))
        if op == "log" and v > 0.0:
            return Const(math.log(v))
        if op == "sqrt" and v >= 0.0:
            return Const(math.sqrt(v))
    return Unary(op, arg)


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.arg)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)


@dataclass(frozen=True)
class TimeSpec:
    name: str
    t0: Expr  # Const or ParamRef
    tf: Expr  # Const or ParamRef
    source_line: int = field(default=0, compare=False)

    @property
    def is_fixed(self) -> bool:
        return isinstance(self.t0, Const) and isinstance(self.tf, Const)


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: DeclKind
    dim: int
    component_names: Optional[Tuple[str, ...]] = None
    source_line: int = field(default=0, compare=False)

    def component_label(self, i: int) -> str:
        """Name used to refer to component ``i`` in source text."""
        if self.component_names is not None:
            return self.component_names[i]
        if self.dim == 1:
            return self.name
        return f"{self.name}{i + 1}"


@dataclass(frozen=True)
class ConstraintDecl:
    """One source constraint line, expanded to one row per component.

    Equality rows have ``lower == upper``. Dynamics equations use
    ``component`` for the state component they define and carry the
    right-hand side as their single expression.
    """

    kind: ConstraintKind
    exprs: Tuple[Expr, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    component: Optional[int] = None
    source_line: int = field(default=0, compare=False)

    @property
    def rows(self) -> int:
        return len(self.exprs)

    @property
    def is_equality(self) -> bool:
        return self.lower == self.upper


@dataclass(frozen=True)
class CostDecl:
    """Bolza cost. Under ``Sense.MAX`` both terms are stored negated."""

    mayer: Optional[Expr]
    lagrange: Optional[Expr]
    sense: Sense = Sense.MIN
    source_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class OcpProblem:
    time: TimeSpec
    decls: Tuple[VarDecl, ...]
    dynamics: Tuple[ConstraintDecl, ...]
    constraints: Tuple[ConstraintDecl, ...]
    cost: CostDecl
    name: str = field(default="ocp", compare=False)

    def decls_of(self, kind: DeclKind) -> Tuple[VarDecl, ...]:
        return tuple(d for d in self.decls if d.kind == kind)

    def dim(self, kind: DeclKind) -> int:
        """Total dimension of all declarations of ``kind``."""
        return sum(d.dim for d in self.decls_of(kind))

    @property
    def state_dim(self) -> int:
        return self.dim(DeclKind.STATE)

    @property
    def control_dim(self) -> int:
        return self.dim(DeclKind.CONTROL)

    @property
    def variable_dim(self) -> int:
        return self.dim(DeclKind.VARIABLE)

    @property
    def has_free_horizon(self) -> bool:
        return not self.time.is_fixed

    def slot(self, kind: DeclKind, decl: str, component: int) -> int:
        """Index of a component within the concatenated slab of ``kind``."""
        offset = 0
        for d in self.decls_of(kind):
            if d.name == decl:
                return offset + component
            offset += d.dim
        raise KeyError(decl)
