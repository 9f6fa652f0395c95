"""Barrier reformulation of a structured NLP.

The solver works on ``w = (x_free, s)``: the decision slots whose bounds
differ, followed by one slack per inequality row. Fixed slots are
substituted. Equality rows ``c_r(x) = b_r`` and inequality rows
``c_r(x) - s_r = 0`` share one residual vector in the original row order.
Objective and rows are scaled by :class:`ProblemScaling`.
"""

from typing import Optional, Tuple

import numpy as np

from octrans.backends import Backend
from octrans.transcription import StructuredNlp

from .scaling import ProblemScaling


class BarrierProblem:
    def __init__(
        self,
        nlp: StructuredNlp,
        scaling: Optional[ProblemScaling] = None,
        backend: Optional[Backend] = None,
    ):
        self.nlp = nlp
        self.backend = backend
        self.scaling = scaling or ProblemScaling.identity(nlp.m_con)
        dc = self.scaling.rows

        fixed = nlp.lvar == nlp.uvar
        self.free = np.flatnonzero(~fixed)
        self.x_fixed = np.where(fixed, nlp.lvar, 0.0)
        self.fixed = fixed

        lcon, ucon = nlp.lcon, nlp.ucon
        self.equality = lcon == ucon
        self.ineq_rows = np.flatnonzero(~self.equality)
        self.targets = np.where(self.equality, lcon, 0.0) * dc

        self.n_free = len(self.free)
        self.n_slack = len(self.ineq_rows)
        self.n = self.n_free + self.n_slack
        self.m = nlp.m_con

        row_scale = dc[self.ineq_rows]
        self.lower = np.concatenate(
            [nlp.lvar[self.free], lcon[self.ineq_rows] * row_scale]
        )
        self.upper = np.concatenate(
            [nlp.uvar[self.free], ucon[self.ineq_rows] * row_scale]
        )
        self.has_lower = np.isfinite(self.lower)
        self.has_upper = np.isfinite(self.upper)

        wmap = np.full(nlp.nvar, -1, dtype=np.int64)
        wmap[self.free] = np.arange(self.n_free)
        self.wmap = wmap

        jr, jc = nlp.jac_structure
        self._jac_keep = wmap[jc] >= 0
        slack_cols = self.n_free + np.arange(self.n_slack)
        self.jac_rows = np.concatenate([jr[self._jac_keep], self.ineq_rows])
        self.jac_cols = np.concatenate([wmap[jc[self._jac_keep]], slack_cols])
        self._jac_scale = dc[self.jac_rows[: int(self._jac_keep.sum())]]

        hr, hc = nlp.hess_structure
        self._hess_keep = (wmap[hr] >= 0) & (wmap[hc] >= 0)
        self.hess_rows = wmap[hr[self._hess_keep]]
        self.hess_cols = wmap[hc[self._hess_keep]]

    # ------------------------------------------------------------------
    # Vector mappings
    # ------------------------------------------------------------------

    def x_full(self, w: np.ndarray) -> np.ndarray:
        x = self.x_fixed.copy()
        x[self.free] = w[: self.n_free]
        return x

    def slacks(self, w: np.ndarray) -> np.ndarray:
        return w[self.n_free :]

    def initial_slacks(self, x: np.ndarray) -> np.ndarray:
        c = self.nlp.evaluate_constraints(x, self.backend)
        return c[self.ineq_rows] * self.scaling.rows[self.ineq_rows]

    # ------------------------------------------------------------------
    # Functions
    # ------------------------------------------------------------------

    def objective(self, w: np.ndarray) -> float:
        return self.scaling.objective * self.nlp.objective(self.x_full(w), self.backend)

    def unscaled_objective(self, w: np.ndarray) -> float:
        return self.nlp.objective(self.x_full(w), self.backend)

    def residual(self, w: np.ndarray) -> np.ndarray:
        """Scaled ``c(x) - b`` on equality rows and ``c(x) - s`` on the others."""
        c = self.nlp.evaluate_constraints(self.x_full(w), self.backend)
        r = c * self.scaling.rows - self.targets
        r[self.ineq_rows] -= self.slacks(w)
        return r

    def gradient(self, w: np.ndarray) -> np.ndarray:
        g = self.nlp.gradient(self.x_full(w), self.backend)
        out = np.zeros(self.n)
        out[: self.n_free] = self.scaling.objective * g[self.free]
        return out

    def jacobian(self, w: np.ndarray) -> np.ndarray:
        """Values at :attr:`jac_rows`, :attr:`jac_cols`."""
        values = self.nlp.jacobian(self.x_full(w), self.backend)
        kept = values[self._jac_keep] * self._jac_scale
        return np.concatenate([kept, -np.ones(self.n_slack)])

    def hessian(self, w: np.ndarray, multipliers: np.ndarray) -> np.ndarray:
        """Lagrangian Hessian values at :attr:`hess_rows`, :attr:`hess_cols`."""
        values = self.nlp.hessian(
            self.x_full(w),
            multipliers * self.scaling.rows,
            objective_weight=self.scaling.objective,
            backend=self.backend,
        )
        return values[self._hess_keep]

    # ------------------------------------------------------------------
    # Products with the Jacobian
    # ------------------------------------------------------------------

    def jt_product(self, jac: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``J^T v``, summed in a fixed order."""
        weights = jac * v[self.jac_rows]
        return np.bincount(self.jac_cols, weights=weights, minlength=self.n)

    def j_product(self, jac: np.ndarray, d: np.ndarray) -> np.ndarray:
        weights = jac * d[self.jac_cols]
        return np.bincount(self.jac_rows, weights=weights, minlength=self.m)

    # ------------------------------------------------------------------

    def push_interior(self, w: np.ndarray, kappa: float) -> np.ndarray:
        """Clip into ``[l + kappa*d, u - kappa*d]`` with ``d = min(1, u - l)``."""
        width = np.where(
            self.has_lower & self.has_upper,
            np.minimum(1.0, self.upper - self.lower),
            1.0,
        )
        lo = np.where(self.has_lower, self.lower + kappa * width, -np.inf)
        hi = np.where(self.has_upper, self.upper - kappa * width, np.inf)
        return np.clip(w, lo, hi)

    def distances(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """``w - l`` and ``u - w``, with 1 where the bound is infinite."""
        dl = np.where(self.has_lower, w - self.lower, 1.0)
        du = np.where(self.has_upper, self.upper - w, 1.0)
        return dl, du
