"""Structural sparsity of kernels.

Patterns are per index (the stencil) and hold for every index of a group.
Entries are structural: an entry is kept whenever the derivative is not
identically zero as an expression, even if it cancels numerically.
"""

from dataclasses import dataclass
from typing import FrozenSet, List, Set, Tuple

import numpy as np

from .expr import NONLINEAR_UNARY, Kernel, Op

Pair = Tuple[int, int]


@dataclass(frozen=True)
class SparsityPattern:
    """Stencil pattern of a kernel, in kernel-input numbering.

    ``jac_rows[e], jac_inputs[e]`` is Jacobian entry ``e``;
    ``hess_first[e] >= hess_second[e]`` is Hessian entry ``e`` (one per
    unordered input pair).
    """

    jac_rows: np.ndarray
    jac_inputs: np.ndarray
    hess_first: np.ndarray
    hess_second: np.ndarray

    @property
    def jac_nnz(self) -> int:
        return len(self.jac_rows)

    @property
    def hess_nnz(self) -> int:
        return len(self.hess_first)

    def jacobian_coo(
        self, kernel: Kernel, indices: range, row_offset: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Global (row, column) coordinates, index-major, for ``indices``.

        Row of output ``r`` at index ``i`` is
        ``row_offset + (i - indices.start) * out_dim + r``.
        """
        idx = np.arange(indices.start, indices.stop, dtype=np.int64)
        local = idx - indices.start
        rows = row_offset + local[:, None] * kernel.out_dim + self.jac_rows[None, :]
        slots = kernel.slot_matrix(idx)  # (K, L)
        cols = slots[self.jac_inputs, :].T
        return rows.reshape(-1), cols.reshape(-1)

    def hessian_coo(
        self, kernel: Kernel, indices: range
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Global (row, column) coordinates, index-major, for ``indices``."""
        idx = np.arange(indices.start, indices.stop, dtype=np.int64)
        slots = kernel.slot_matrix(idx)
        first = slots[self.hess_first, :].T
        second = slots[self.hess_second, :].T
        return first.reshape(-1), second.reshape(-1)


def dependencies(kernel: Kernel) -> Tuple[List[FrozenSet[int]], List[Set[Pair]]]:
    """Per node: inputs it depends on and its nonlinear input pairs."""
    deps: List[FrozenSet[int]] = []
    pairs: List[Set[Pair]] = []
    empty: FrozenSet[int] = frozenset()
    for node in kernel.nodes:
        if node.op == Op.INPUT:
            deps.append(frozenset({int(node.value)}))
            pairs.append(set())
            continue
        if node.op in (Op.CONST, Op.INDEX):
            deps.append(empty)
            pairs.append(set())
            continue
        if len(node.args) == 1:
            (a,) = node.args
            d = deps[a]
            p = set(pairs[a])
            if node.op in NONLINEAR_UNARY or node.op == Op.POWC:
                p |= _cross(d, d)
            deps.append(d)
            pairs.append(p)
            continue
        a, b = node.args
        d = deps[a] | deps[b]
        p = pairs[a] | pairs[b]
        if node.op == Op.MUL:
            p |= _cross(deps[a], deps[b])
        elif node.op == Op.DIV:
            p |= _cross(deps[a], deps[b]) | _cross(deps[b], deps[b])
        deps.append(d)
        pairs.append(p)
    return deps, pairs


def _cross(a: FrozenSet[int], b: FrozenSet[int]) -> Set[Pair]:
    return {(max(i, j), min(i, j)) for i in a for j in b}


def detect_sparsity(kernel: Kernel) -> SparsityPattern:
    """Exact structural Jacobian and Lagrangian-Hessian stencil of ``kernel``."""
    deps, pairs = dependencies(kernel)
    jac_rows: List[int] = []
    jac_inputs: List[int] = []
    hess: Set[Pair] = set()
    for r, out in enumerate(kernel.outputs):
        for k in sorted(deps[out]):
            jac_rows.append(r)
            jac_inputs.append(k)
        hess |= pairs[out]
    ordered = sorted(hess)
    return SparsityPattern(
        jac_rows=np.array(jac_rows, dtype=np.int64),
        jac_inputs=np.array(jac_inputs, dtype=np.int64),
        hess_first=np.array([p[0] for p in ordered], dtype=np.int64),
        hess_second=np.array([p[1] for p in ordered], dtype=np.int64),
    )
