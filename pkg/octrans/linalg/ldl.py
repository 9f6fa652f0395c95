"""Sparse LDL^T factorization with 1x1 pivots.

The symbolic phase (ordering, elimination tree, column counts of L) runs
once per pattern. The numeric phase is the up-looking variant: row ``k``
of L comes from a sparse triangular solve along the elimination tree.
Pivots are taken in the fixed order of the permutation; small pivots are
not rejected but counted in the inertia, and the caller regularizes.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from numba import njit

from octrans.core.exceptions import FactorizationException, InvariantViolation
from octrans.core.logging import get_logger

from .ordering import OrderingFactory
from .sparse import SparseSym

logger = get_logger(__name__)

Inertia = Tuple[int, int, int]

DEFAULT_PIVOT_TOL = 1e-14
DEFAULT_REFINE_TOL = 1e-12


@njit(cache=True)
def _etree_counts(n, ap, ai, perm, pinv):
    """Elimination tree and column pointers of L for ``P A P^T``."""
    parent = np.empty(n, dtype=np.int64)
    flag = np.empty(n, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        parent[k] = -1
        flag[k] = k
        kk = perm[k]
        for p in range(ap[kk], ap[kk + 1]):
            i = pinv[ai[p]]
            if i < k:
                while flag[i] != k:
                    if parent[i] == -1:
                        parent[i] = k
                    lnz[i] += 1
                    flag[i] = k
                    i = parent[i]
    lp = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        lp[k + 1] = lp[k] + lnz[k]
    return parent, lp


@njit(cache=True)
def _numeric(n, ap, ai, ax, lp, parent, perm, pinv, tol):
    li = np.empty(lp[n], dtype=np.int64)
    lx = np.empty(lp[n], dtype=np.float64)
    d = np.empty(n, dtype=np.float64)
    y = np.zeros(n, dtype=np.float64)
    pattern = np.empty(n, dtype=np.int64)
    flag = np.empty(n, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    npos = 0
    nneg = 0
    nzero = 0
    for k in range(n):
        top = n
        flag[k] = k
        kk = perm[k]
        for p in range(ap[kk], ap[kk + 1]):
            i = pinv[ai[p]]
            if i <= k:
                y[i] += ax[p]
                length = 0
                while flag[i] != k:
                    pattern[length] = i
                    length += 1
                    flag[i] = k
                    i = parent[i]
                while length > 0:
                    top -= 1
                    length -= 1
                    pattern[top] = pattern[length]
        dk = y[k]
        y[k] = 0.0
        while top < n:
            i = pattern[top]
            yi = y[i]
            y[i] = 0.0
            p2 = lp[i] + lnz[i]
            for p in range(lp[i], p2):
                y[li[p]] -= lx[p] * yi
            l_ki = yi / d[i]
            dk -= l_ki * yi
            li[p2] = k
            lx[p2] = l_ki
            lnz[i] += 1
            top += 1
        if abs(dk) <= tol or not np.isfinite(dk):
            nzero += 1
            if dk == 0.0 or not np.isfinite(dk):
                dk = tol if tol > 0.0 else 1.0
        elif dk > 0.0:
            npos += 1
        else:
            nneg += 1
        d[k] = dk
    return li, lx, d, npos, nneg, nzero


@njit(cache=True)
def _solve(n, lp, li, lx, d, perm, b):
    y = np.empty(n, dtype=np.float64)
    for k in range(n):
        y[k] = b[perm[k]]
    for j in range(n):
        yj = y[j]
        for p in range(lp[j], lp[j + 1]):
            y[li[p]] -= lx[p] * yj
    for j in range(n):
        y[j] /= d[j]
    for j in range(n - 1, -1, -1):
        acc = y[j]
        for p in range(lp[j], lp[j + 1]):
            acc -= lx[p] * y[li[p]]
        y[j] = acc
    x = np.empty(n, dtype=np.float64)
    for k in range(n):
        x[perm[k]] = y[k]
    return x


@dataclass(frozen=True)
class SymbolicFactor:
    """Ordering and structure of L for one matrix pattern."""

    n: int
    ordering: str
    perm: np.ndarray
    pinv: np.ndarray
    parent: np.ndarray
    lp: np.ndarray
    lower_indptr: np.ndarray
    lower_indices: np.ndarray
    full_indptr: np.ndarray
    full_indices: np.ndarray
    full_source: np.ndarray  # lower-data position of each full entry

    @property
    def l_nnz(self) -> int:
        """Strictly lower entries of L."""
        return int(self.lp[-1])

    def matches(self, matrix: SparseSym) -> bool:
        return (
            matrix.n == self.n
            and np.array_equal(matrix.indptr, self.lower_indptr)
            and np.array_equal(matrix.indices, self.lower_indices)
        )


@dataclass(frozen=True)
class LdlFactor:
    """``P A P^T = L D L^T`` of the regularized matrix ``matrix``."""

    symbolic: SymbolicFactor
    li: np.ndarray
    lx: np.ndarray
    d: np.ndarray
    inertia: Inertia
    threshold: float
    matrix: SparseSym
    delta_w: float = 0.0
    delta_c: float = 0.0
    n_primal: int = field(default=0)

    @property
    def zero_pivots(self) -> int:
        return self.inertia[2]

    @property
    def perm(self) -> np.ndarray:
        return self.symbolic.perm

    def lower(self) -> sp.csc_matrix:
        """Unit lower-triangular L in the permuted numbering."""
        n = self.symbolic.n
        strict = sp.csc_matrix((self.lx, self.li, self.symbolic.lp), shape=(n, n))
        return (strict + sp.identity(n, format="csc")).tocsc()

    def reconstruct(self) -> np.ndarray:
        """Dense ``L D L^T``, for checks on small matrices."""
        L = self.lower().toarray()
        return (L * self.d) @ L.T


def analyze(pattern: SparseSym, ordering: str = "amd") -> SymbolicFactor:
    """One-time symbolic phase for every matrix sharing ``pattern``'s structure.

    The diagonal is always part of the analyzed structure.
    """
    n = pattern.n
    lower = pattern.shifted(np.zeros(n))
    perm = np.asarray(OrderingFactory.create_ordering(ordering)(lower), np.int64)
    pinv = np.empty(n, dtype=np.int64)
    pinv[perm] = np.arange(n)

    cols = lower.column_indices()
    rows = lower.indices
    off = rows != cols
    source = np.arange(lower.nnz, dtype=np.int64)
    full_rows = np.concatenate([rows, cols[off]])
    full_cols = np.concatenate([cols, rows[off]])
    full_source = np.concatenate([source, source[off]])
    order = np.lexsort((full_rows, full_cols))
    full_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(full_cols, minlength=n), out=full_indptr[1:])
    full_indices = full_rows[order].astype(np.int64)

    parent, lp = _etree_counts(n, full_indptr, full_indices, perm, pinv)
    symbolic = SymbolicFactor(
        n=n,
        ordering=ordering,
        perm=perm,
        pinv=pinv,
        parent=parent,
        lp=lp,
        lower_indptr=lower.indptr,
        lower_indices=lower.indices,
        full_indptr=full_indptr,
        full_indices=full_indices,
        full_source=full_source[order],
    )
    logger.debug(
        "symbolic_analysis",
        n=n,
        ordering=ordering,
        a_nnz=lower.nnz,
        l_nnz=symbolic.l_nnz,
    )
    return symbolic


def fill_in(symbolic: SymbolicFactor) -> int:
    """Entries of L beyond the strictly lower pattern of A."""
    a_strict = symbolic.lower_indptr[-1] - symbolic.n
    return symbolic.l_nnz - int(a_strict)


def factorize(
    A: SparseSym,
    symbolic: SymbolicFactor,
    delta_w: float = 0.0,
    delta_c: float = 0.0,
    n_primal: Optional[int] = None,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
    pivot_scale: Optional[float] = None,
) -> LdlFactor:
    """Numeric LDL^T of ``A + diag(delta_w I_primal, -delta_c I_dual)``.

    The first ``n_primal`` rows form the primal block (all rows by default).
    Pivots with ``|d| <= pivot_tol * pivot_scale`` count as zero. The scale
    defaults to ``max(1, max|A|)`` of the unshifted matrix, so the
    regularization never raises the threshold.
    """
    n = symbolic.n
    n_primal = n if n_primal is None else n_primal
    shift = np.zeros(n)
    shift[:n_primal] = delta_w
    shift[n_primal:] = -delta_c
    matrix = A.shifted(shift)
    if not symbolic.matches(matrix):
        raise InvariantViolation(
            "matrix pattern differs from the analyzed pattern",
            details={"n": n, "nnz": matrix.nnz},
        )
    ax = matrix.data[symbolic.full_source]
    if pivot_scale is None:
        pivot_scale = max(1.0, A.norm_max())
    tol = pivot_tol * pivot_scale
    li, lx, d, npos, nneg, nzero = _numeric(
        n,
        symbolic.full_indptr,
        symbolic.full_indices,
        ax,
        symbolic.lp,
        symbolic.parent,
        symbolic.perm,
        symbolic.pinv,
        tol,
    )
    return LdlFactor(
        symbolic=symbolic,
        li=li,
        lx=lx,
        d=d,
        inertia=(int(npos), int(nneg), int(nzero)),
        threshold=tol,
        matrix=matrix,
        delta_w=delta_w,
        delta_c=delta_c,
        n_primal=n_primal,
    )


def solve(factor: LdlFactor, b: np.ndarray) -> np.ndarray:
    if factor.zero_pivots > 0:
        raise FactorizationException(
            f"factor has {factor.zero_pivots} zero pivot(s); regularize first",
            zero_pivots=factor.zero_pivots,
        )
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (factor.symbolic.n,):
        raise InvariantViolation(
            "right-hand side has the wrong length",
            details={"expected": factor.symbolic.n, "got": b.shape},
        )
    sym = factor.symbolic
    return _solve(sym.n, sym.lp, factor.li, factor.lx, factor.d, sym.perm, b)


def refine(
    A: Optional[SparseSym],
    factor: LdlFactor,
    b: np.ndarray,
    x: Optional[np.ndarray] = None,
    max_rounds: int = 5,
    tol: float = DEFAULT_REFINE_TOL,
) -> np.ndarray:
    """Residual-correction rounds on ``A x = b`` (the factored matrix by default).

    Stops when ``|r|_inf <= tol * (|A|_inf |x|_inf + |b|_inf)``.
    """
    A = factor.matrix if A is None else A
    x = solve(factor, b) if x is None else np.array(x, dtype=np.float64)
    norm_a = A.norm_inf()
    norm_b = float(np.max(np.abs(b))) if len(b) else 0.0
    for _ in range(max_rounds):
        r = b - A.matvec(x)
        norm_x = float(np.max(np.abs(x))) if len(x) else 0.0
        if np.max(np.abs(r), initial=0.0) <= tol * (norm_a * norm_x + norm_b):
            break
        x += solve(factor, r)
    return x
