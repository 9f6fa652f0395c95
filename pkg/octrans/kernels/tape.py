"""Vectorized kernel evaluation and derivatives.

A :class:`KernelTape` compiles each kind of pass (values, Jacobian,
gradient, Hessian) once into a straight-line program of numpy ufunc calls
over a block of grid indices. Jacobians come from forward-mode tangents
keyed by kernel input; Hessians of weighted output sums from
forward-over-reverse, so one pass yields the whole stencil-dense second
derivative. Constant folding and structural zeros are resolved while
compiling, and registers are reused once their last reader has run.

Every ufunc writes into a per-thread workspace sized for the block, so
after the first call for a given block length an evaluation allocates no
array storage.
"""

import threading
from dataclasses import dataclass
from typing import (
    Callable,
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from octrans.core.exceptions import EvaluationError

from .expr import Kernel, Op
from .sparsity import SparsityPattern, detect_sparsity

# A compile-time operand: a virtual register, a nonzero constant, or None
# for a structural zero.
Operand = Union[int, float, None]
Tangent = Dict[int, Operand]

KINDS = ("value", "jacobian", "gradient", "hessian")

_UNARY, _BINARY, _FILL, _COPY = range(4)

_UFUNCS: Dict[Op, Callable] = {
    Op.SIN: np.sin,
    Op.COS: np.cos,
    Op.TAN: np.tan,
    Op.EXP: np.exp,
    Op.LOG: np.log,
    Op.SQRT: np.sqrt,
}


def _is_reg(v: Operand) -> bool:
    return type(v) is int


def _const(v: float) -> Operand:
    return None if v == 0.0 else float(v)


def _fold(fn: Callable, *args: float) -> Operand:
    with np.errstate(all="ignore"):
        return _const(float(fn(*args)))


class _Instr(NamedTuple):
    kind: int
    fn: Optional[Callable]
    a: Operand
    b: Operand
    dest: int  # virtual register, or -(e + 1) for output column e


class _Emitter:
    """Builds straight-line code with folding and common-subexpression reuse."""

    def __init__(self) -> None:
        self.code: List[_Instr] = []
        self._registers = 0
        self._memo: Dict[tuple, int] = {}

    def new(self) -> int:
        self._registers += 1
        return self._registers - 1

    def _emit(self, kind: int, fn: Callable, a: Operand, b: Operand = None) -> int:
        key = (fn, kind, _is_reg(a), a, _is_reg(b), b)
        found = self._memo.get(key)
        if found is not None:
            return found
        dest = self.new()
        self.code.append(_Instr(kind, fn, a, b, dest))
        self._memo[key] = dest
        return dest

    def neg(self, a: Operand) -> Operand:
        if a is None:
            return None
        if not _is_reg(a):
            return -a
        return self._emit(_UNARY, np.negative, a)

    def unary(self, fn: Callable, a: Operand) -> Operand:
        if not _is_reg(a):
            return _fold(fn, a or 0.0)
        return self._emit(_UNARY, fn, a)

    def power(self, a: Operand, c: float) -> Operand:
        if c == 0.0:
            return 1.0
        if c == 1.0:
            return a
        if not _is_reg(a):
            return _fold(np.power, a or 0.0, c)
        return self._emit(_BINARY, np.power, a, c)

    def add(self, a: Operand, b: Operand) -> Operand:
        if a is None:
            return b
        if b is None:
            return a
        if not _is_reg(a) and not _is_reg(b):
            return _fold(np.add, a, b)
        return self._emit(_BINARY, np.add, a, b)

    def sub(self, a: Operand, b: Operand) -> Operand:
        if b is None:
            return a
        if a is None:
            return self.neg(b)
        if not _is_reg(a) and not _is_reg(b):
            return _fold(np.subtract, a, b)
        return self._emit(_BINARY, np.subtract, a, b)

    def mul(self, a: Operand, b: Operand) -> Operand:
        if a is None or b is None:
            return None
        if not _is_reg(a) and not _is_reg(b):
            return _fold(np.multiply, a, b)
        if not _is_reg(a):
            a, b = b, a
        if b == 1.0 and not _is_reg(b):
            return a
        if b == -1.0 and not _is_reg(b):
            return self.neg(a)
        return self._emit(_BINARY, np.multiply, a, b)

    def div(self, a: Operand, b: Operand) -> Operand:
        if b is None:
            b = 0.0
        elif a is None:
            return None
        if not _is_reg(a) and not _is_reg(b):
            return _fold(np.divide, a or 0.0, b)
        return self._emit(_BINARY, np.divide, a if a is not None else 0.0, b)


def _first_derivative(
    em: _Emitter, op: Op, u: Operand, y: Operand, c: float
) -> Operand:
    if op == Op.NEG:
        return -1.0
    if op == Op.SIN:
        return em.unary(np.cos, u)
    if op == Op.COS:
        return em.neg(em.unary(np.sin, u))
    if op == Op.TAN:
        return em.add(1.0, em.mul(y, y))
    if op == Op.EXP:
        return y
    if op == Op.LOG:
        return em.div(1.0, u)
    if op == Op.SQRT:
        return em.div(0.5, y)
    if op == Op.POWC:
        return em.mul(_const(c), em.power(u, c - 1.0))
    raise ValueError(f"not a unary op: {op!r}")


def _second_derivative(
    em: _Emitter, op: Op, u: Operand, y: Operand, c: float
) -> Operand:
    if op == Op.NEG:
        return None
    if op in (Op.SIN, Op.COS):
        return em.neg(y)
    if op == Op.TAN:
        return em.mul(2.0, em.mul(y, em.add(1.0, em.mul(y, y))))
    if op == Op.EXP:
        return y
    if op == Op.LOG:
        return em.neg(em.div(1.0, em.mul(u, u)))
    if op == Op.SQRT:
        return em.div(-0.25, em.mul(y, em.mul(y, y)))
    if op == Op.POWC:
        return em.mul(_const(c * (c - 1.0)), em.power(u, c - 2.0))
    raise ValueError(f"not a unary op: {op!r}")


def _accumulate(
    em: _Emitter, acc: Tangent, tangent: Tangent, scale: Operand = 1.0
) -> None:
    for k, v in tangent.items():
        term = em.mul(v, scale)
        acc[k] = em.add(acc[k], term) if k in acc else term


def _scaled(em: _Emitter, tangent: Tangent, scale: Operand) -> Tangent:
    return {k: em.mul(v, scale) for k, v in tangent.items()}


@dataclass(frozen=True)
class _Program:
    """Register-allocated code for one kind of pass.

    Operands are ``("r", i)`` register rows, ``("s", r)`` seed rows,
    ``("o", e)`` output rows, or float constants.
    """

    code: Tuple[tuple, ...]
    n_registers: int
    width: int
    loads: Tuple[Tuple[int, int, int], ...]  # (register, base, stride)
    grid: Optional[int]
    seeded: bool


def _link(
    em: _Emitter,
    results: Sequence[Operand],
    loads: Dict[int, Tuple[int, int]],
    grid: int,
    seeds: Sequence[int],
) -> _Program:
    code = list(em.code)
    for e, v in enumerate(results):
        if _is_reg(v):
            code.append(_Instr(_COPY, None, v, None, -(e + 1)))
        else:
            code.append(_Instr(_FILL, None, v or 0.0, None, -(e + 1)))

    # drop instructions nothing reads
    needed: set = set()
    kept: List[_Instr] = []
    for ins in reversed(code):
        if ins.dest < 0 or ins.dest in needed:
            kept.append(ins)
            needed.update(v for v in (ins.a, ins.b) if _is_reg(v))
    kept.reverse()

    last_use: Dict[int, int] = {}
    for i, ins in enumerate(kept):
        for v in (ins.a, ins.b):
            if _is_reg(v):
                last_use[v] = i

    seed_rows = {v: r for r, v in enumerate(seeds)}
    physical: Dict[int, int] = {}
    free: List[int] = []
    count = 0

    def take() -> int:
        nonlocal count
        if free:
            return free.pop()
        count += 1
        return count - 1

    preamble = [v for v in list(loads) + [grid] if v in last_use]
    for v in preamble:
        physical[v] = take()

    def operand(v: Operand):
        if not _is_reg(v):
            return v
        if v in seed_rows:
            return ("s", seed_rows[v])
        return ("r", physical[v])

    linked = []
    for i, ins in enumerate(kept):
        a, b = operand(ins.a), operand(ins.b)
        for v in {v for v in (ins.a, ins.b) if _is_reg(v)}:
            if last_use[v] == i and v not in seed_rows:
                free.append(physical[v])
        if ins.dest < 0:
            dest = ("o", -ins.dest - 1)
        else:
            physical[ins.dest] = take()
            dest = ("r", physical[ins.dest])
        linked.append((ins.kind, ins.fn, a, b, dest))

    return _Program(
        code=tuple(linked),
        n_registers=count,
        width=len(results),
        loads=tuple(
            (physical[v], base, stride)
            for v, (base, stride) in loads.items()
            if v in physical
        ),
        grid=physical.get(grid),
        seeded=any(v in last_use for v in seeds),
    )


class _Workspace:
    """Buffers and row-bound code for one program at one block length."""

    def __init__(self, program: _Program, length: int, out_dim: int):
        self.arange = np.arange(length, dtype=np.int64)
        self.index = np.empty(length, dtype=np.int64)
        self.positions = np.empty(length, dtype=np.int64)
        self.registers = np.empty((program.n_registers, length))
        self.outputs = np.empty((program.width, length))
        self.seed_block = np.empty((out_dim, length)) if program.seeded else None
        self.seeds = self.seed_block.T if self.seed_block is not None else None
        rows = {
            "r": list(self.registers),
            "o": list(self.outputs),
            "s": list(self.seed_block) if self.seed_block is not None else [],
        }

        def bind(v):
            return rows[v[0]][v[1]] if isinstance(v, tuple) else v

        self.grid = rows["r"][program.grid] if program.grid is not None else None
        self.loads = [
            (rows["r"][reg], base, stride) for reg, base, stride in program.loads
        ]
        self.code = [
            (kind, fn, bind(a), bind(b), bind(dest))
            for kind, fn, a, b, dest in program.code
        ]


class KernelTape:
    """Compiled evaluator for one kernel."""

    def __init__(self, kernel: Kernel, pattern: Optional[SparsityPattern] = None):
        self.kernel = kernel
        self.pattern = pattern if pattern is not None else detect_sparsity(kernel)
        self._program = [(node.op, node.args, node.value) for node in kernel.nodes]
        self._compiled: Dict[str, _Program] = {}
        self._lock = threading.Lock()
        self._local = threading.local()
        self.workspace_allocations = 0

    @property
    def name(self) -> str:
        return self.kernel.name

    def width(self, kind: str) -> int:
        if kind == "value":
            return self.kernel.out_dim
        if kind == "jacobian":
            return self.pattern.jac_nnz
        if kind == "gradient":
            return self.kernel.n_inputs
        return self.pattern.hess_nnz

    # ------------------------------------------------------------------
    # Compilation
    # ------------------------------------------------------------------

    def _forward(
        self, em: _Emitter, loads: Dict[int, Tuple[int, int]], grid: int
    ) -> List[Operand]:
        inputs = list(loads)
        values: List[Operand] = []
        for op, args, c in self._program:
            if op == Op.CONST:
                v = _const(c)
            elif op == Op.INPUT:
                v = inputs[int(c)]
            elif op == Op.INDEX:
                v = em.add(grid, _const(c))
            elif op == Op.NEG:
                v = em.neg(values[args[0]])
            elif op == Op.ADD:
                v = em.add(values[args[0]], values[args[1]])
            elif op == Op.SUB:
                v = em.sub(values[args[0]], values[args[1]])
            elif op == Op.MUL:
                v = em.mul(values[args[0]], values[args[1]])
            elif op == Op.DIV:
                v = em.div(values[args[0]], values[args[1]])
            elif op == Op.POWC:
                v = em.power(values[args[0]], c)
            elif op in _UFUNCS:
                v = em.unary(_UFUNCS[op], values[args[0]])
            else:
                raise ValueError(f"unknown op {op!r}")
            values.append(v)
        return values

    def _tangents(self, em: _Emitter, values: List[Operand]) -> List[Tangent]:
        tangents: List[Tangent] = []
        for node_id, (op, args, c) in enumerate(self._program):
            if op == Op.INPUT:
                tangents.append({int(c): 1.0})
            elif op in (Op.CONST, Op.INDEX):
                tangents.append({})
            elif op == Op.ADD or op == Op.SUB:
                t = dict(tangents[args[0]])
                sign = 1.0 if op == Op.ADD else -1.0
                _accumulate(em, t, tangents[args[1]], sign)
                tangents.append(t)
            elif op == Op.MUL:
                a, b = args
                t = _scaled(em, tangents[a], values[b])
                _accumulate(em, t, tangents[b], values[a])
                tangents.append(t)
            elif op == Op.DIV:
                a, b = args
                q = em.div(1.0, values[b])
                t = _scaled(em, tangents[a], q)
                _accumulate(em, t, tangents[b], em.neg(em.mul(values[node_id], q)))
                tangents.append(t)
            else:
                (a,) = args
                d1 = _first_derivative(em, op, values[a], values[node_id], c)
                tangents.append(_scaled(em, tangents[a], d1))
        return tangents

    def _reverse(
        self,
        em: _Emitter,
        values: List[Operand],
        seeds: Sequence[int],
        tangents: Optional[List[Tangent]],
    ):
        """Adjoints of ``sum_r seeds[r] * output_r``.

        Returns per-input adjoints and, when ``tangents`` is given, the
        per-input adjoint tangents (rows of the Hessian).
        """
        second = tangents is not None
        bar: Dict[int, Operand] = {}
        dbar: Dict[int, Tangent] = {}
        for r, out in enumerate(self.kernel.outputs):
            bar[out] = em.add(bar[out], seeds[r]) if out in bar else seeds[r]

        grad: Dict[int, Operand] = {}
        hess: Dict[int, Tangent] = {}

        def push(target: int, adj: Operand, dt: Optional[Tangent]) -> None:
            bar[target] = em.add(bar[target], adj) if target in bar else adj
            if second and dt:
                _accumulate(em, dbar.setdefault(target, {}), dt)

        for node_id in range(len(self._program) - 1, -1, -1):
            if node_id not in bar:
                continue
            adj = bar[node_id]
            dt = dbar.get(node_id, {})
            if adj is None and not dt:
                continue
            op, args, c = self._program[node_id]
            if op == Op.INPUT:
                grad[int(c)] = adj
                if second:
                    hess[int(c)] = dt
                continue
            if op in (Op.CONST, Op.INDEX):
                continue
            if op == Op.ADD:
                push(args[0], adj, dt)
                push(args[1], adj, dt)
            elif op == Op.SUB:
                push(args[0], adj, dt)
                push(args[1], em.neg(adj), _scaled(em, dt, -1.0) if second else None)
            elif op == Op.MUL:
                a, b = args
                va, vb = values[a], values[b]
                ta = tb = None
                if second:
                    assert tangents is not None
                    ta = _scaled(em, dt, vb)
                    _accumulate(em, ta, tangents[b], adj)
                    tb = _scaled(em, dt, va)
                    _accumulate(em, tb, tangents[a], adj)
                push(a, em.mul(adj, vb), ta)
                push(b, em.mul(adj, va), tb)
            elif op == Op.DIV:
                a, b = args
                q = em.div(1.0, values[b])
                y = values[node_id]
                yq = em.mul(y, q)
                ta = tb = None
                if second:
                    assert tangents is not None
                    # d(1/b) = -q^2 db ; d(a/b^2) = q^2 da - 2 y q^2 db
                    aqq = em.mul(adj, em.mul(q, q))
                    ta = _scaled(em, dt, q)
                    _accumulate(em, ta, tangents[b], em.neg(aqq))
                    tb = _scaled(em, dt, em.neg(yq))
                    _accumulate(em, tb, tangents[a], em.neg(aqq))
                    _accumulate(em, tb, tangents[b], em.mul(2.0, em.mul(y, aqq)))
                push(a, em.mul(adj, q), ta)
                push(b, em.neg(em.mul(adj, yq)), tb)
            else:
                (a,) = args
                u, y = values[a], values[node_id]
                d1 = _first_derivative(em, op, u, y, c)
                ta = None
                if second:
                    assert tangents is not None
                    ta = _scaled(em, dt, d1)
                    if op != Op.NEG:
                        d2 = _second_derivative(em, op, u, y, c)
                        _accumulate(em, ta, tangents[a], em.mul(adj, d2))
                push(a, em.mul(adj, d1), ta)
        return grad, hess

    def _compile(self, kind: str) -> _Program:
        em = _Emitter()
        loads = {em.new(): (s.base, s.stride) for s in self.kernel.inputs}
        grid = em.new()
        seeds: List[int] = []
        values = self._forward(em, loads, grid)
        pattern = self.pattern
        if kind == "value":
            results = [values[node] for node in self.kernel.outputs]
        elif kind == "jacobian":
            tangents = self._tangents(em, values)
            results = [
                tangents[self.kernel.outputs[pattern.jac_rows[e]]].get(
                    int(pattern.jac_inputs[e])
                )
                for e in range(pattern.jac_nnz)
            ]
        else:
            seeds = [em.new() for _ in range(self.kernel.out_dim)]
            tangents = self._tangents(em, values) if kind == "hessian" else None
            grad, hess = self._reverse(em, values, seeds, tangents)
            if kind == "gradient":
                results = [grad.get(k) for k in range(self.kernel.n_inputs)]
            else:
                results = [
                    hess.get(int(pattern.hess_first[e]), {}).get(
                        int(pattern.hess_second[e])
                    )
                    for e in range(pattern.hess_nnz)
                ]
        return _link(em, results, loads, grid, seeds)

    def program(self, kind: str) -> _Program:
        compiled = self._compiled.get(kind)
        if compiled is None:
            if kind not in KINDS:
                raise ValueError(f"unknown pass {kind!r}")
            with self._lock:
                compiled = self._compiled.get(kind)
                if compiled is None:
                    compiled = self._compile(kind)
                    self._compiled[kind] = compiled
        return compiled

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    def _workspace(self, kind: str, length: int) -> _Workspace:
        cache = getattr(self._local, "workspaces", None)
        if cache is None:
            cache = self._local.workspaces = {}
        ws = cache.get((kind, length))
        if ws is None:
            ws = _Workspace(self.program(kind), length, self.kernel.out_dim)
            cache[(kind, length)] = ws
            with self._lock:
                self.workspace_allocations += 1
        return ws

    def run(
        self,
        kind: str,
        x: np.ndarray,
        length: int,
        start: int = 0,
        idx: Optional[np.ndarray] = None,
        seeds: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Evaluate one pass over ``length`` indices.

        The indices are ``start, start + 1, ...`` unless ``idx`` is given.
        Returns the workspace output block, shape ``(width, length)``; it is
        overwritten by the next call on this thread.
        """
        ws = self._workspace(kind, length)
        if idx is None:
            np.add(ws.arange, start, out=ws.index)
        else:
            np.copyto(ws.index, idx)
        if ws.grid is not None:
            np.copyto(ws.grid, ws.index)
        for row, base, stride in ws.loads:
            if stride == 0:
                row.fill(x[base])
            else:
                np.multiply(ws.index, stride, out=ws.positions)
                np.add(ws.positions, base, out=ws.positions)
                np.take(x, ws.positions, out=row, mode="clip")
        if ws.seeds is not None:
            np.copyto(ws.seeds, seeds)
        with np.errstate(all="ignore"):
            for op, fn, a, b, out in ws.code:
                if op == _BINARY:
                    fn(a, b, out=out)
                elif op == _UNARY:
                    fn(a, out=out)
                elif op == _COPY:
                    np.copyto(out, a)
                else:
                    out.fill(a)
        return self._checked(ws.outputs, kind)

    def _checked(self, out: np.ndarray, what: str) -> np.ndarray:
        if out.size and not (np.isfinite(out.min()) and np.isfinite(out.max())):
            raise EvaluationError(
                f"non-finite {what} in kernel '{self.name}'", group=self.name
            )
        return out

    # ------------------------------------------------------------------
    # Block evaluators; each returns a new array with one row per index
    # ------------------------------------------------------------------

    def _rows(
        self,
        kind: str,
        x: np.ndarray,
        idx: np.ndarray,
        seeds: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        result = np.zeros((len(idx), self.width(kind)))
        if len(idx) and result.shape[1]:
            result[:] = self.run(kind, x, len(idx), idx=idx, seeds=seeds).T
        return result

    def values(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Outputs at ``idx``, shape ``(len(idx), out_dim)``."""
        return self._rows("value", x, idx)

    def jacobian(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Stencil Jacobian entries, shape ``(len(idx), jac_nnz)``."""
        return self._rows("jacobian", x, idx)

    def gradient(
        self, x: np.ndarray, idx: np.ndarray, weights: np.ndarray
    ) -> np.ndarray:
        """Input adjoints of the weighted outputs, shape ``(len(idx), n_inputs)``."""
        return self._rows("gradient", x, idx, _as_seeds(weights, len(idx)))

    def hessian(
        self, x: np.ndarray, idx: np.ndarray, weights: np.ndarray
    ) -> np.ndarray:
        """Stencil entries of the Hessian of the weighted output sum.

        ``weights`` has shape ``(len(idx), out_dim)``; the result has shape
        ``(len(idx), hess_nnz)``.
        """
        return self._rows("hessian", x, idx, _as_seeds(weights, len(idx)))


def _as_seeds(weights: np.ndarray, length: int) -> np.ndarray:
    seeds = np.asarray(weights, dtype=np.float64)
    if seeds.ndim == 1:
        seeds = seeds[:, None]
    if seeds.shape[0] != length:
        raise ValueError("one weight row per index is required")
    return seeds


# ----------------------------------------------------------------------
# Buffer-writing entry points
# ----------------------------------------------------------------------
#
# ``out`` is the whole buffer of a group whose index range starts at
# ``start``; each call writes only the positions of ``indices``.


def _write(
    tape: KernelTape,
    kind: str,
    x: np.ndarray,
    indices: range,
    out: np.ndarray,
    start: int,
    seeds: Optional[np.ndarray] = None,
) -> None:
    n = len(indices)
    width = tape.width(kind)
    if n == 0 or width == 0:
        return
    block = tape.run(kind, x, n, start=indices.start, seeds=seeds)
    lo = (indices.start - start) * width
    np.copyto(out[lo : lo + n * width].reshape(n, width), block.T)


def eval_value(
    tape: KernelTape, x: np.ndarray, indices: range, out: np.ndarray, start: int
) -> None:
    _write(tape, "value", x, indices, out, start)


def eval_jacobian(
    tape: KernelTape, x: np.ndarray, indices: range, out: np.ndarray, start: int
) -> None:
    _write(tape, "jacobian", x, indices, out, start)


def eval_hessian(
    tape: KernelTape,
    x: np.ndarray,
    weights: np.ndarray,
    indices: range,
    out: np.ndarray,
    start: int,
) -> None:
    """``weights`` holds one row of output multipliers per index of the group."""
    block = weights[indices.start - start : indices.stop - start]
    _write(tape, "hessian", x, indices, out, start, block)


def eval_gradient(
    tape: KernelTape,
    x: np.ndarray,
    weights: np.ndarray,
    indices: range,
    out: np.ndarray,
    start: int,
) -> None:
    """Per-index input adjoints; ``out`` rows are indices, columns inputs."""
    block = weights[indices.start - start : indices.stop - start]
    _write(tape, "gradient", x, indices, out.reshape(-1), start, block)
