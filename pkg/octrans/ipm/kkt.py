"""Augmented KKT system assembly and inertia correction."""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from octrans.core.exceptions import SolverException
from octrans.core.logging import get_logger
from octrans.linalg import CooAssembly, LdlFactor, SparseSym, SymbolicFactor
from octrans.linalg import factorize as ldl_factorize
from octrans.models.schemas import IpmOptions

from .problem import BarrierProblem

logger = get_logger(__name__)


class KktSystem:
    """Fixed structure of ``[[W + Sigma, J^T], [J, 0]]`` in lower CSC form.

    Coordinates are the Hessian pairs, the Jacobian entries shifted below the
    primal block, and the full diagonal. Coinciding coordinates are summed.
    """

    def __init__(
        self,
        n_primal: int,
        m: int,
        hess_rows: np.ndarray,
        hess_cols: np.ndarray,
        jac_rows: np.ndarray,
        jac_cols: np.ndarray,
    ):
        self.n_primal = n_primal
        self.m = m
        diag = np.arange(n_primal + m)
        rows = np.concatenate([hess_rows, n_primal + np.asarray(jac_rows), diag])
        cols = np.concatenate([hess_cols, jac_cols, diag])
        self.assembly = CooAssembly.plan(n_primal + m, rows, cols)
        self._hess_nnz = len(hess_rows)
        self._jac_nnz = len(jac_rows)

    @classmethod
    def for_problem(cls, problem: BarrierProblem) -> "KktSystem":
        return cls(
            problem.n,
            problem.m,
            problem.hess_rows,
            problem.hess_cols,
            problem.jac_rows,
            problem.jac_cols,
        )

    @property
    def dim(self) -> int:
        return self.n_primal + self.m

    def pattern(self) -> SparseSym:
        return self.assembly.assemble(np.zeros(len(self.assembly.position)))

    def assemble(
        self,
        hessian: np.ndarray,
        jacobian: np.ndarray,
        sigma: np.ndarray,
        delta_w: float = 0.0,
        delta_c: float = 0.0,
    ) -> SparseSym:
        if len(hessian) != self._hess_nnz or len(jacobian) != self._jac_nnz:
            raise SolverException("derivative values do not match the KKT structure")
        diag = np.concatenate([sigma + delta_w, np.full(self.m, -delta_c)])
        return self.assembly.assemble(np.concatenate([hessian, jacobian, diag]))


def assemble_kkt(
    kkt: KktSystem,
    hessian: np.ndarray,
    jacobian: np.ndarray,
    sigma: np.ndarray,
    delta_w: float = 0.0,
    delta_c: float = 0.0,
) -> SparseSym:
    """Regularized KKT matrix; ``sigma`` is the primal barrier diagonal."""
    return kkt.assemble(hessian, jacobian, sigma, delta_w, delta_c)


@dataclass
class InertiaCorrector:
    """Regularize until the factorization has inertia ``(n_primal, m, 0)``.

    ``delta_w`` starts at zero each iteration. On a wrong inertia it jumps to
    ``delta_w_first`` growing by ``delta_w_first_growth``, or, once a
    correction has succeeded, to a third of the last value growing by
    ``delta_w_growth``. Zero pivots switch on ``delta_c = delta_c * mu**0.25``,
    floored well above the pivot threshold.

    ``pivot_scale`` is the magnitude of the unregularized derivative blocks;
    the barrier diagonal and the shifts stay out of it.
    """

    options: IpmOptions
    last_delta_w: float = 0.0
    counters: Dict[str, int] = field(default_factory=dict)

    def _count(self, name: str) -> None:
        self.counters[name] = self.counters.get(name, 0) + 1

    def factorize(
        self,
        matrix: SparseSym,
        symbolic: SymbolicFactor,
        n_primal: int,
        m: int,
        mu: float,
        pivot_scale: float = 1.0,
    ) -> LdlFactor:
        opts = self.options
        target = (n_primal, m, 0)
        pivot_scale = max(1.0, pivot_scale)
        jacobian_shift = max(
            opts.delta_c * mu**0.25, 100.0 * opts.pivot_tol * pivot_scale
        )

        def attempt(delta_w: float, delta_c: float) -> LdlFactor:
            self._count("factorizations")
            return ldl_factorize(
                matrix,
                symbolic,
                delta_w=delta_w,
                delta_c=delta_c,
                n_primal=n_primal,
                pivot_tol=opts.pivot_tol,
                pivot_scale=pivot_scale,
            )

        delta_w, delta_c = 0.0, 0.0
        factor = attempt(delta_w, delta_c)
        if factor.inertia == target:
            return factor
        if factor.zero_pivots > 0 and m > 0:
            delta_c = jacobian_shift
            factor = attempt(delta_w, delta_c)
            if factor.inertia == target:
                return factor

        self._count("inertia_corrections")
        if self.last_delta_w == 0.0:
            delta_w = opts.delta_w_first
            growth = opts.delta_w_first_growth
        else:
            delta_w = max(1e-20, self.last_delta_w / opts.delta_w_shrink)
            growth = opts.delta_w_growth
        while True:
            factor = attempt(delta_w, delta_c)
            if factor.inertia == target:
                self.last_delta_w = delta_w
                logger.debug("inertia_corrected", delta_w=delta_w, delta_c=delta_c)
                return factor
            if factor.zero_pivots > 0 and delta_c == 0.0 and m > 0:
                delta_c = jacobian_shift
            delta_w *= growth
            if delta_w > opts.delta_w_max:
                raise SolverException(
                    f"inertia correction failed: inertia {factor.inertia}, "
                    f"expected {target}"
                )
