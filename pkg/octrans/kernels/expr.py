"""Per-index kernel expression graphs.

A kernel is a small DAG evaluated at one grid index ``i``. Its leaves read
decision slots through affine maps ``base + stride * i`` (the stencil), the
grid index itself, or constants. Nodes are hash-consed by
:class:`KernelBuilder`, so identical subexpressions are shared.
"""

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Sequence, Tuple

import numpy as np


class Op(IntEnum):
    """Kernel node operations."""

    CONST = 0
    INPUT = 1
    INDEX = 2
    NEG = 3
    ADD = 4
    SUB = 5
    MUL = 6
    DIV = 7
    POWC = 8
    SIN = 9
    COS = 10
    TAN = 11
    EXP = 12
    LOG = 13
    SQRT = 14


UNARY_OPS = {
    "neg": Op.NEG,
    "sin": Op.SIN,
    "cos": Op.COS,
    "tan": Op.TAN,
    "exp": Op.EXP,
    "log": Op.LOG,
    "sqrt": Op.SQRT,
}
BINARY_OPS = {"+": Op.ADD, "-": Op.SUB, "*": Op.MUL, "/": Op.DIV}
NONLINEAR_UNARY = frozenset({Op.SIN, Op.COS, Op.TAN, Op.EXP, Op.LOG, Op.SQRT})

_SYMBOLS = {
    Op.NEG: "neg",
    Op.ADD: "+",
    Op.SUB: "-",
    Op.MUL: "*",
    Op.DIV: "/",
    Op.POWC: "^",
    Op.SIN: "sin",
    Op.COS: "cos",
    Op.TAN: "tan",
    Op.EXP: "exp",
    Op.LOG: "log",
    Op.SQRT: "sqrt",
}


@dataclass(frozen=True)
class SlotInput:
    """A stencil entry: the kernel reads ``x[base + stride * i]``."""

    base: int
    stride: int
    label: str = field(default="", compare=False)

    def slot(self, index: int) -> int:
        return self.base + self.stride * index


@dataclass(frozen=True)
class KernelNode:
    op: Op
    args: Tuple[int, ...] = ()
    value: float = 0.0  # constant, exponent, input number or index offset


@dataclass(frozen=True)
class Kernel:
    """Immutable kernel: topologically ordered nodes and output node ids."""

    name: str
    nodes: Tuple[KernelNode, ...]
    inputs: Tuple[SlotInput, ...]
    outputs: Tuple[int, ...]

    @property
    def out_dim(self) -> int:
        return len(self.outputs)

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    def slot_matrix(self, indices: np.ndarray) -> np.ndarray:
        """Global slots read at each index, shape ``(n_inputs, len(indices))``."""
        bases = np.array([s.base for s in self.inputs], dtype=np.int64)
        strides = np.array([s.stride for s in self.inputs], dtype=np.int64)
        return bases[:, None] + strides[:, None] * np.asarray(indices, dtype=np.int64)

    def prefix(self, output: int = 0) -> str:
        """Prefix-notation text of one output, e.g. ``(* 0.5 (^ u1@i 2.0))``."""
        return self._prefix(self.outputs[output])

    def _prefix(self, node_id: int) -> str:
        node = self.nodes[node_id]
        if node.op == Op.CONST:
            return repr(node.value)
        if node.op == Op.INPUT:
            slot = self.inputs[int(node.value)]
            return slot.label or f"x[{slot.base}+{slot.stride}i]"
        if node.op == Op.INDEX:
            offset = int(node.value)
            return "i" if offset == 0 else f"(+ i {offset})"
        args = " ".join(self._prefix(a) for a in node.args)
        if node.op == Op.POWC:
            return f"(^ {args} {node.value!r})"
        return f"({_SYMBOLS[node.op]} {args})"


class KernelBuilder:
    """Build a :class:`Kernel` with constant folding and subexpression sharing."""

    def __init__(self, name: str):
        self.name = name
        self._nodes: List[KernelNode] = []
        self._ids: Dict[KernelNode, int] = {}
        self._inputs: List[SlotInput] = []
        self._input_ids: Dict[SlotInput, int] = {}

    def _intern(self, node: KernelNode) -> int:
        existing = self._ids.get(node)
        if existing is not None:
            return existing
        self._nodes.append(node)
        self._ids[node] = len(self._nodes) - 1
        return self._ids[node]

    def _const_value(self, node_id: int):
        node = self._nodes[node_id]
        return node.value if node.op == Op.CONST else None

    def const(self, value: float) -> int:
        return self._intern(KernelNode(Op.CONST, (), float(value)))

    def input(self, slot: SlotInput) -> int:
        number = self._input_ids.get(slot)
        if number is None:
            number = len(self._inputs)
            self._inputs.append(slot)
            self._input_ids[slot] = number
        return self._intern(KernelNode(Op.INPUT, (), float(number)))

    def index(self, offset: int = 0) -> int:
        return self._intern(KernelNode(Op.INDEX, (), float(offset)))

    def unary(self, op: Op, arg: int) -> int:
        value = self._const_value(arg)
        if value is not None:
            folded = _fold_unary(op, value)
            if folded is not None:
                return self.const(folded)
        if op == Op.NEG:
            inner = self._nodes[arg]
            if inner.op == Op.NEG:
                return inner.args[0]
        return self._intern(KernelNode(op, (arg,)))

    def binary(self, op: Op, left: int, right: int) -> int:
        a, b = self._const_value(left), self._const_value(right)
        if a is not None and b is not None:
            folded = _fold_binary(op, a, b)
            if folded is not None:
                return self.const(folded)
        return self._intern(KernelNode(op, (left, right)))

    def power(self, base: int, exponent: int) -> int:
        """``base ^ exponent``; non-constant exponents become ``exp(e * log(b))``."""
        c = self._const_value(exponent)
        if c is None:
            return self.unary(
                Op.EXP, self.binary(Op.MUL, exponent, self.unary(Op.LOG, base))
            )
        if c == 0.0:
            return self.const(1.0)
        if c == 1.0:
            return base
        a = self._const_value(base)
        if a is not None:
            folded = _fold_binary(Op.POWC, a, c)
            if folded is not None:
                return self.const(folded)
        return self._intern(KernelNode(Op.POWC, (base,), float(c)))

    def build(self, outputs: Sequence[int]) -> Kernel:
        return Kernel(
            name=self.name,
            nodes=tuple(self._nodes),
            inputs=tuple(self._inputs),
            outputs=tuple(outputs),
        )


def _fold_unary(op: Op, v: float):
    if op == Op.NEG:
        return -v
    if op == Op.SIN:
        return math.sin(v)
    if op == Op.COS:
        return math.cos(v)
    if op == Op.TAN:
        return math.tan(v)
    if op == Op.EXP and v < 700.0:
        return math.exp(v)
    if op == Op.LOG and v > 0.0:
        return math.log(v)
    if op == Op.SQRT and v >= 0.0:
        return math.sqrt(v)
    return None


def _fold_binary(op: Op, a: float, b: float):
    if op == Op.ADD:
        return a + b
    if op == Op.SUB:
        return a - b
    if op == Op.MUL:
        return a * b
    if op == Op.DIV and b != 0.0:
        return a / b
    if op == Op.POWC and (a > 0.0 or (float(b).is_integer() and a != 0.0)):
        try:
            return a**b
        except OverflowError:
            return None
    return None
