"""Filter line-search primal-dual interior-point solver."""

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np

from octrans.backends import Backend, get_backend
from octrans.core.exceptions import EvaluationError, SolverException
from octrans.core.logging import get_logger
from octrans.linalg import (
    LdlFactor,
    SymbolicFactor,
    analyze,
    refine,
    write_matrix_market,
)
from octrans.linalg import solve as ldl_solve
from octrans.models.schemas import (
    IpmOptions,
    KktResiduals,
    PhaseTimings,
    Solution,
    SolveStatus,
)
from octrans.transcription import StructuredNlp

from .filter import Filter
from .kkt import InertiaCorrector, KktSystem
from .problem import BarrierProblem
from .reporting import IterationInfo, IterationTable
from .scaling import ProblemScaling, scale_problem

logger = get_logger(__name__)

IterationCallback = Callable[[IterationInfo], None]
SecondOrderSolve = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

_EPS = np.finfo(float).eps


@dataclass
class IpmState:
    """Iterate and bookkeeping of one solve.

    ``w`` holds the free decision slots followed by the slacks; bound duals
    are zero where the bound is infinite.
    """

    w: np.ndarray
    lam: np.ndarray
    z_lower: np.ndarray
    z_upper: np.ndarray
    mu: float
    filter: Filter
    n_free: int
    iteration: int = 0
    delta_w: float = 0.0
    delta_c: float = 0.0
    counters: Dict[str, int] = field(default_factory=dict)

    @property
    def x_free(self) -> np.ndarray:
        return self.w[: self.n_free]

    @property
    def slacks(self) -> np.ndarray:
        return self.w[self.n_free :]

    def count(self, name: str, amount: int = 1) -> None:
        self.counters[name] = self.counters.get(name, 0) + amount


@dataclass(frozen=True)
class _Errors:
    inf_pr: float
    inf_du: float
    inf_comp: float
    scaled: float


@dataclass
class _Point:
    """Function values at the current iterate."""

    f: float
    grad: np.ndarray
    r: np.ndarray
    jac: np.ndarray

    @property
    def theta(self) -> float:
        return float(np.abs(self.r).sum())


@dataclass
class _StepResult:
    """Outcome of one backtracking line search.

    ``dw`` and ``dlam`` are the accepted direction, which is the
    second-order corrected one when ``corrected`` is set.
    """

    accepted: bool
    alpha: float
    dw: np.ndarray
    dlam: np.ndarray
    point: _Point
    trials: int = 0
    eval_failed: bool = False
    corrected: bool = False


def fraction_to_boundary(
    values: np.ndarray, step: np.ndarray, mask: np.ndarray, tau: float
) -> float:
    """Largest ``alpha <= 1`` keeping ``values + alpha*step >= (1-tau)*values``."""
    shrinking = mask & (step < 0.0)
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, np.min(-tau * values[shrinking] / step[shrinking])))


def _primal_fraction(
    problem: BarrierProblem, w: np.ndarray, dw: np.ndarray, tau: float
) -> float:
    dl, du = problem.distances(w)
    return min(
        fraction_to_boundary(dl, dw, problem.has_lower, tau),
        fraction_to_boundary(du, -dw, problem.has_upper, tau),
    )


class InteriorPointSolver:
    def __init__(
        self,
        nlp: StructuredNlp,
        options: Optional[IpmOptions] = None,
        backend: Optional[Backend] = None,
        callback: Optional[IterationCallback] = None,
    ):
        self.nlp = nlp
        self.options = options or IpmOptions()
        self._own_backend = backend is None
        self.backend = backend or get_backend(self.options.backend)
        self.callbacks = [callback] if callback else []
        if self.options.verbose:
            self.callbacks.append(IterationTable())
        self._timings: Dict[str, float] = {
            "derivatives": 0.0,
            "factorization": 0.0,
            "solves": 0.0,
        }

    @contextmanager
    def _timed(self, phase: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self._timings[phase] += time.perf_counter() - start

    # ------------------------------------------------------------------
    # Setup
    # ------------------------------------------------------------------

    def _setup(self) -> Tuple[BarrierProblem, IpmState]:
        opts = self.options
        nlp = self.nlp
        with self._timed("derivatives"):
            if opts.scaling:
                scaling = scale_problem(
                    nlp, nlp.x_start, self.backend, opts.scaling_max_gradient
                )
            else:
                scaling = ProblemScaling.identity(nlp.m_con)
            problem = BarrierProblem(nlp, scaling, self.backend)
            x0 = nlp.x_start
            w = np.concatenate([x0[problem.free], problem.initial_slacks(x0)])
        w = problem.push_interior(w, opts.bound_push)
        mu = opts.mu_init
        dl, du = problem.distances(w)
        state = IpmState(
            w=w,
            lam=np.zeros(problem.m),
            z_lower=np.where(problem.has_lower, mu / dl, 0.0),
            z_upper=np.where(problem.has_upper, mu / du, 0.0),
            mu=mu,
            filter=Filter(opts.gamma_theta, opts.gamma_phi),
            n_free=problem.n_free,
        )
        return problem, state

    def _evaluate(self, problem: BarrierProblem, w: np.ndarray) -> _Point:
        with self._timed("derivatives"):
            return _Point(
                f=problem.objective(w),
                grad=problem.gradient(w),
                r=problem.residual(w),
                jac=problem.jacobian(w),
            )

    def _trial_point(
        self, problem: BarrierProblem, w: np.ndarray, base: _Point
    ) -> Optional[_Point]:
        """Objective and residual at ``w``; derivatives are borrowed from ``base``."""
        try:
            with self._timed("derivatives"):
                f = problem.objective(w)
                r = problem.residual(w)
        except EvaluationError:
            return None
        return _Point(f=f, grad=base.grad, r=r, jac=base.jac)

    # ------------------------------------------------------------------
    # Optimality measures
    # ------------------------------------------------------------------

    def _errors(
        self, problem: BarrierProblem, state: IpmState, point: _Point, mu: float
    ) -> _Errors:
        s_max = self.options.s_max
        dl, du = problem.distances(state.w)
        dual = (
            point.grad
            + problem.jt_product(point.jac, state.lam)
            - state.z_lower
            + state.z_upper
        )
        comp_l = np.where(problem.has_lower, dl * state.z_lower - mu, 0.0)
        comp_u = np.where(problem.has_upper, du * state.z_upper - mu, 0.0)
        n_bounds = int(problem.has_lower.sum() + problem.has_upper.sum())
        z_sum = float(np.abs(state.z_lower).sum() + np.abs(state.z_upper).sum())
        lam_sum = float(np.abs(state.lam).sum())
        s_d = max(s_max, (lam_sum + z_sum) / max(1, problem.m + n_bounds)) / s_max
        s_c = max(s_max, z_sum / max(1, n_bounds)) / s_max
        inf_du = float(np.max(np.abs(dual), initial=0.0))
        inf_pr = float(np.max(np.abs(point.r), initial=0.0))
        inf_comp = float(
            max(
                np.max(np.abs(comp_l), initial=0.0),
                np.max(np.abs(comp_u), initial=0.0),
            )
        )
        return _Errors(
            inf_pr=inf_pr,
            inf_du=inf_du,
            inf_comp=inf_comp,
            scaled=max(inf_du / s_d, inf_pr, inf_comp / s_c),
        )

    @staticmethod
    def _residuals(
        problem: BarrierProblem, point: _Point, errors: _Errors
    ) -> KktResiduals:
        """Optimality residuals in the units of the unscaled problem."""
        sf = problem.scaling.objective
        return KktResiduals(
            stationarity=errors.inf_du / sf,
            feasibility=float(
                np.max(np.abs(point.r / problem.scaling.rows), initial=0.0)
            ),
            complementarity=errors.inf_comp / sf,
            scaled_error=errors.scaled,
        )

    def _converged(
        self, problem: BarrierProblem, point: _Point, errors: _Errors
    ) -> bool:
        """Scaled error within ``tol`` and every unscaled residual within ``10 tol``."""
        tol = self.options.tol
        if errors.scaled > tol:
            return False
        residuals = self._residuals(problem, point, errors)
        return (
            max(
                residuals.stationarity,
                residuals.feasibility,
                residuals.complementarity,
            )
            <= 10.0 * tol
        )

    @staticmethod
    def _barrier(problem: BarrierProblem, w: np.ndarray, f: float, mu: float) -> float:
        dl, du = problem.distances(w)
        if np.any(dl <= 0.0) or np.any(du <= 0.0):
            return float("inf")
        log_l = np.sum(np.log(dl[problem.has_lower]))
        log_u = np.sum(np.log(du[problem.has_upper]))
        return float(f - mu * (log_l + log_u))

    # ------------------------------------------------------------------
    # Step computation
    # ------------------------------------------------------------------

    def _factorize(
        self,
        problem: BarrierProblem,
        kkt: KktSystem,
        symbolic: SymbolicFactor,
        corrector: InertiaCorrector,
        state: IpmState,
        hess: np.ndarray,
        jac: np.ndarray,
        sigma: np.ndarray,
    ) -> LdlFactor:
        pivot_scale = max(
            1.0,
            float(np.max(np.abs(hess), initial=0.0)),
            float(np.max(np.abs(jac), initial=0.0)),
        )
        with self._timed("factorization"):
            matrix = kkt.assemble(hess, jac, sigma)
            return corrector.factorize(
                matrix, symbolic, problem.n, problem.m, state.mu, pivot_scale
            )

    def _solve_kkt(
        self, factor: LdlFactor, rhs: np.ndarray, state: IpmState
    ) -> np.ndarray:
        """Solve with the factor and refine when the residual is large."""
        opts = self.options
        with self._timed("solves"):
            d = ldl_solve(factor, rhs)
            residual = rhs - factor.matrix.matvec(d)
            trigger = opts.refinement_trigger * (1.0 + np.max(np.abs(rhs), initial=0.0))
            worst = np.max(np.abs(residual), initial=0.0)
            if opts.refinement_rounds and worst > trigger:
                state.count("refinements")
                d = refine(None, factor, rhs, d, max_rounds=opts.refinement_rounds)
        return d

    def _direction(
        self,
        problem: BarrierProblem,
        kkt: KktSystem,
        symbolic: SymbolicFactor,
        corrector: InertiaCorrector,
        state: IpmState,
        point: _Point,
        grad_phi: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, SecondOrderSolve]:
        """Newton direction and a solver for second-order corrected steps."""
        dl, du = problem.distances(state.w)
        sigma = np.where(problem.has_lower, state.z_lower / dl, 0.0) + np.where(
            problem.has_upper, state.z_upper / du, 0.0
        )
        with self._timed("derivatives"):
            hess = problem.hessian(state.w, state.lam)
        factor = self._factorize(
            problem, kkt, symbolic, corrector, state, hess, point.jac, sigma
        )
        state.delta_w, state.delta_c = factor.delta_w, factor.delta_c
        if self.options.dump_kkt_dir:
            path = Path(self.options.dump_kkt_dir) / f"kkt_{state.iteration:04d}.mtx"
            write_matrix_market(path, factor.matrix)

        top = -(grad_phi + problem.jt_product(point.jac, state.lam))
        n = problem.n

        def second_order(c_soc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            d_soc = self._solve_kkt(factor, np.concatenate([top, -c_soc]), state)
            return d_soc[:n], d_soc[n:]

        d = self._solve_kkt(factor, np.concatenate([top, -point.r]), state)
        return d[:n], d[n:], second_order

    def _multiplier_estimate(
        self,
        problem: BarrierProblem,
        kkt: KktSystem,
        symbolic: SymbolicFactor,
        corrector: InertiaCorrector,
        state: IpmState,
        point: _Point,
    ) -> np.ndarray:
        """Least-squares ``lam`` for the current bound duals, zero when too large."""
        zeros = np.zeros(problem.m)
        if problem.m == 0:
            return zeros
        try:
            factor = self._factorize(
                problem,
                kkt,
                symbolic,
                corrector,
                state,
                np.zeros(len(problem.hess_rows)),
                point.jac,
                np.ones(problem.n),
            )
        except SolverException:
            return zeros
        rhs = -np.concatenate(
            [point.grad - state.z_lower + state.z_upper, np.zeros(problem.m)]
        )
        lam = self._solve_kkt(factor, rhs, state)[problem.n :]
        if np.max(np.abs(lam), initial=0.0) > self.options.lam_init_max:
            return zeros
        return lam

    def _dual_step(
        self, problem: BarrierProblem, state: IpmState, dw: np.ndarray, tau: float
    ) -> Tuple[np.ndarray, np.ndarray, float]:
        mu = state.mu
        dl, du = problem.distances(state.w)
        dz_l = np.where(
            problem.has_lower,
            mu / dl - state.z_lower - state.z_lower / dl * dw,
            0.0,
        )
        dz_u = np.where(
            problem.has_upper,
            mu / du - state.z_upper + state.z_upper / du * dw,
            0.0,
        )
        alpha_z = min(
            fraction_to_boundary(state.z_lower, dz_l, problem.has_lower, tau),
            fraction_to_boundary(state.z_upper, dz_u, problem.has_upper, tau),
        )
        return dz_l, dz_u, alpha_z

    # ------------------------------------------------------------------
    # Main loop
    # ------------------------------------------------------------------

    def solve(self) -> Solution:
        try:
            return self._run()
        finally:
            if self._own_backend:
                self.backend.close()

    def _run(self) -> Solution:  # noqa: C901
        opts = self.options
        started = time.perf_counter()
        try:
            problem, state = self._setup()
        except EvaluationError as exc:
            return self._failed_start(exc, started)

        kkt = KktSystem.for_problem(problem)
        symbolic = analyze(kkt.pattern(), opts.ordering)
        state.count("analyze_calls")
        state.counters["kkt_nnz"] = int(symbolic.lower_indptr[-1])
        state.counters["l_nnz"] = symbolic.l_nnz
        corrector = InertiaCorrector(opts, counters=state.counters)

        status: Optional[SolveStatus] = None
        message: Optional[str] = None
        retried = False
        theta_max = theta_min = 0.0
        point: Optional[_Point] = None
        mu_min = opts.tol / 10.0 * min(1.0, problem.scaling.objective)

        while True:
            if point is None:
                try:
                    point = self._evaluate(problem, state.w)
                except EvaluationError as exc:
                    status, message = SolveStatus.EVAL_ERROR, str(exc)
                    break
                state.lam = self._multiplier_estimate(
                    problem, kkt, symbolic, corrector, state, point
                )
                theta0 = point.theta
                theta_max = 1e4 * max(1.0, theta0)
                theta_min = 1e-4 * max(1.0, theta0)
                state.filter.reset(theta_max)

            errors0 = self._errors(problem, state, point, 0.0)
            if self._converged(problem, point, errors0):
                status = SolveStatus.OPTIMAL
                break
            if state.iteration >= opts.max_iter:
                status = SolveStatus.MAX_ITER
                break

            # barrier update
            errors_mu = self._errors(problem, state, point, state.mu)
            while (
                not retried
                and errors_mu.scaled <= opts.kappa_eps * state.mu
                and state.mu > mu_min
            ):
                state.mu = max(
                    mu_min, min(opts.kappa_mu * state.mu, state.mu**opts.theta_mu)
                )
                state.filter.reset(theta_max)
                state.count("filter_resets")
                errors_mu = self._errors(problem, state, point, state.mu)

            mu = state.mu
            dl, du = problem.distances(state.w)
            grad_phi = (
                point.grad
                - np.where(problem.has_lower, mu / dl, 0.0)
                + np.where(problem.has_upper, mu / du, 0.0)
            )
            try:
                dw, dlam, second_order = self._direction(
                    problem, kkt, symbolic, corrector, state, point, grad_phi
                )
            except EvaluationError as exc:
                status, message = SolveStatus.EVAL_ERROR, str(exc)
                break
            except SolverException as exc:
                status, message = SolveStatus.RESTORATION_FAILED, str(exc)
                break

            tau = max(opts.tau_min, 1.0 - mu)
            alpha_max = _primal_fraction(problem, state.w, dw, tau)
            step = self._line_search(
                problem,
                state,
                point,
                dw,
                dlam,
                grad_phi,
                alpha_max,
                theta_min,
                second_order,
            )
            state.iteration += 1

            if not step.accepted:
                if opts.restoration and errors0.inf_pr > opts.tol:
                    restored, point = self._restore(
                        problem, kkt, symbolic, corrector, state, point
                    )
                    if restored:
                        retried = False
                        continue
                    if state.iteration >= opts.max_iter:
                        status = SolveStatus.MAX_ITER
                    else:
                        status = self._failure_status(
                            step.eval_failed, point, problem
                        )
                        message = "feasibility restoration failed"
                    break
                if not retried:
                    retried = True
                    state.mu *= opts.mu_increase
                    state.filter.reset(theta_max)
                    state.count("mu_increases")
                    logger.debug("line_search_failed", iteration=state.iteration)
                    continue
                status = self._failure_status(step.eval_failed, point, problem)
                message = "line search failed after barrier increase"
                break
            retried = False

            dz_l, dz_u, alpha_z = self._dual_step(problem, state, step.dw, tau)
            alpha = step.alpha
            state.w = state.w + alpha * step.dw
            state.lam = state.lam + alpha * step.dlam
            state.z_lower = state.z_lower + alpha_z * dz_l
            state.z_upper = state.z_upper + alpha_z * dz_u
            self._safeguard_duals(problem, state)
            trial_point = step.point
            try:
                with self._timed("derivatives"):
                    trial_point.grad = problem.gradient(state.w)
                    trial_point.jac = problem.jacobian(state.w)
            except EvaluationError as exc:
                status, message = SolveStatus.EVAL_ERROR, str(exc)
                break
            point = trial_point

            info = IterationInfo(
                iteration=state.iteration,
                objective=self.nlp.objective_sign * point.f / problem.scaling.objective,
                theta=float(np.max(np.abs(point.r), initial=0.0)),
                inf_du=errors_mu.inf_du,
                mu=state.mu,
                alpha_primal=alpha,
                alpha_dual=alpha_z,
                delta_w=state.delta_w,
                trials=step.trials,
            )
            logger.debug("ipm_iteration", **asdict(info))
            for callback in self.callbacks:
                callback(info)

        return self._finish(problem, state, point, status, message, started)

    # ------------------------------------------------------------------
    # Globalization
    # ------------------------------------------------------------------

    def _acceptance(
        self,
        state: IpmState,
        theta: float,
        phi: float,
        slope: float,
        theta_trial: float,
        phi_trial: float,
        alpha: float,
        theta_min: float,
    ) -> Optional[bool]:
        """``None`` to reject, otherwise whether the filter must be augmented."""
        opts = self.options
        if not np.isfinite(phi_trial):
            return None
        if not state.filter.acceptable(theta_trial, phi_trial):
            return None
        switching = (
            slope < 0.0
            and alpha * (-slope) ** opts.s_phi > opts.delta_switch * theta**opts.s_theta
        )
        if theta <= theta_min and switching:
            if phi_trial <= phi + opts.eta_phi * alpha * slope:
                return False
            return None
        if (
            theta_trial <= (1.0 - opts.gamma_theta) * theta
            or phi_trial <= phi - opts.gamma_phi * theta
        ):
            return True
        return None

    def _line_search(
        self,
        problem: BarrierProblem,
        state: IpmState,
        point: _Point,
        dw: np.ndarray,
        dlam: np.ndarray,
        grad_phi: np.ndarray,
        alpha_max: float,
        theta_min: float,
        second_order: Optional[SecondOrderSolve] = None,
    ) -> _StepResult:
        opts = self.options
        mu = state.mu
        theta = point.theta
        phi = self._barrier(problem, state.w, point.f, mu)
        slope = float(grad_phi @ dw)
        tiny = np.max(np.abs(dw), initial=0.0) <= 10.0 * _EPS * (
            1.0 + np.max(np.abs(state.w), initial=0.0)
        )

        alpha = alpha_max
        trials = 0
        eval_failed = False
        while alpha >= opts.alpha_min:
            trials += 1
            trial = self._trial_point(problem, state.w + alpha * dw, point)
            if trial is None:
                state.count("eval_errors")
                eval_failed = True
                alpha *= 0.5
                continue
            theta_trial = trial.theta
            phi_trial = self._barrier(problem, state.w + alpha * dw, trial.f, mu)
            if tiny:
                return _StepResult(True, alpha, dw, dlam, trial, trials, eval_failed)
            verdict = self._acceptance(
                state, theta, phi, slope, theta_trial, phi_trial, alpha, theta_min
            )
            if verdict is not None:
                if verdict:
                    state.filter.add(theta, phi)
                return _StepResult(True, alpha, dw, dlam, trial, trials, eval_failed)
            if (
                trials == 1
                and second_order is not None
                and opts.soc_max > 0
                and theta_trial >= theta
            ):
                corrected = self._second_order_step(
                    problem,
                    state,
                    point,
                    alpha,
                    trial,
                    phi,
                    slope,
                    theta_min,
                    second_order,
                )
                if corrected is not None:
                    corrected.trials = trials
                    return corrected
            alpha *= 0.5
        return _StepResult(False, alpha, dw, dlam, point, trials, eval_failed)

    def _second_order_step(
        self,
        problem: BarrierProblem,
        state: IpmState,
        point: _Point,
        alpha: float,
        trial: _Point,
        phi: float,
        slope: float,
        theta_min: float,
        second_order: SecondOrderSolve,
    ) -> Optional[_StepResult]:
        """Correct a rejected full step for the curvature of the constraints.

        The right-hand side accumulates ``c_soc = alpha_soc * c_soc + r(trial)``
        and the original step length decides the Armijo test.
        """
        opts = self.options
        theta = point.theta
        tau = max(opts.tau_min, 1.0 - state.mu)
        c_soc = alpha * point.r + trial.r
        theta_previous = trial.theta
        for _ in range(opts.soc_max):
            state.count("soc_trials")
            dw_soc, dlam_soc = second_order(c_soc)
            alpha_soc = _primal_fraction(problem, state.w, dw_soc, tau)
            w_soc = state.w + alpha_soc * dw_soc
            corrected = self._trial_point(problem, w_soc, point)
            if corrected is None:
                return None
            theta_soc = corrected.theta
            phi_soc = self._barrier(problem, w_soc, corrected.f, state.mu)
            verdict = self._acceptance(
                state, theta, phi, slope, theta_soc, phi_soc, alpha, theta_min
            )
            if verdict is not None:
                if verdict:
                    state.filter.add(theta, phi)
                state.count("soc_accepted")
                return _StepResult(
                    True, alpha_soc, dw_soc, dlam_soc, corrected, corrected=True
                )
            if theta_soc > opts.kappa_soc * theta_previous:
                return None
            theta_previous = theta_soc
            c_soc = alpha_soc * c_soc + corrected.r
        return None

    def _restore(
        self,
        problem: BarrierProblem,
        kkt: KktSystem,
        symbolic: SymbolicFactor,
        corrector: InertiaCorrector,
        state: IpmState,
        point: _Point,
    ) -> Tuple[bool, _Point]:
        """Reduce the violation until the filter accepts the iterate.

        Each step solves ``min 1/2 d'(rho I + Sigma)d + g'd`` subject to
        ``J d = -r``, where ``g`` holds the log-barrier gradient of the bounds
        and a proximity pull ``rho (w - w_ref)``, then backtracks on
        ``|r|_2``. Success needs ``theta <= kappa_resto * theta_start`` and a
        point the filter (augmented with the start) accepts.
        """
        opts = self.options
        mu = state.mu
        state.count("restorations")
        theta_start = point.theta
        state.filter.add(theta_start, self._barrier(problem, state.w, point.f, mu))
        logger.debug(
            "restoration_started", iteration=state.iteration, theta=theta_start
        )

        rho = float(np.sqrt(mu))
        w_ref = state.w.copy()
        w = state.w.copy()
        hess_zero = np.zeros(len(problem.hess_rows))
        tau = max(opts.tau_min, 1.0 - mu)
        current = point
        for _ in range(opts.restoration_max_iter):
            if state.iteration >= opts.max_iter:
                break
            state.iteration += 1
            state.count("restoration_iterations")
            dl, du = problem.distances(w)
            sigma = (
                rho
                + np.where(problem.has_lower, mu / dl**2, 0.0)
                + np.where(problem.has_upper, mu / du**2, 0.0)
            )
            grad = (
                rho * (w - w_ref)
                - np.where(problem.has_lower, mu / dl, 0.0)
                + np.where(problem.has_upper, mu / du, 0.0)
            )
            try:
                factor = self._factorize(
                    problem,
                    kkt,
                    symbolic,
                    corrector,
                    state,
                    hess_zero,
                    current.jac,
                    sigma,
                )
            except SolverException:
                break
            d = self._solve_kkt(factor, -np.concatenate([grad, current.r]), state)
            dw = d[: problem.n]
            alpha = _primal_fraction(problem, w, dw, tau)
            squared = float(current.r @ current.r)
            accepted: Optional[_Point] = None
            while alpha >= opts.alpha_min:
                trial = self._trial_point(problem, w + alpha * dw, current)
                if trial is not None and trial.r @ trial.r <= (
                    1.0 - 1e-4 * alpha
                ) * squared:
                    accepted = trial
                    break
                alpha *= 0.5
            if accepted is None:
                break
            w = w + alpha * dw
            try:
                with self._timed("derivatives"):
                    accepted.grad = problem.gradient(w)
                    accepted.jac = problem.jacobian(w)
            except EvaluationError:
                break
            current = accepted
            theta = current.theta
            phi = self._barrier(problem, w, current.f, mu)
            if theta <= opts.kappa_resto * theta_start and state.filter.acceptable(
                theta, phi
            ):
                state.w = w
                dl, du = problem.distances(w)
                state.z_lower = np.where(problem.has_lower, mu / dl, 0.0)
                state.z_upper = np.where(problem.has_upper, mu / du, 0.0)
                state.lam = self._multiplier_estimate(
                    problem, kkt, symbolic, corrector, state, current
                )
                logger.debug(
                    "restoration_finished", iteration=state.iteration, theta=theta
                )
                return True, current
        state.w = w
        return False, current

    def _safeguard_duals(self, problem: BarrierProblem, state: IpmState) -> None:
        kappa = self.options.kappa_sigma
        mu = state.mu
        dl, du = problem.distances(state.w)
        state.z_lower = np.where(
            problem.has_lower,
            np.clip(state.z_lower, mu / (kappa * dl), kappa * mu / dl),
            0.0,
        )
        state.z_upper = np.where(
            problem.has_upper,
            np.clip(state.z_upper, mu / (kappa * du), kappa * mu / du),
            0.0,
        )

    @staticmethod
    def _failure_status(
        eval_failed: bool, point: _Point, problem: BarrierProblem
    ) -> SolveStatus:
        if eval_failed:
            return SolveStatus.EVAL_ERROR
        inf_pr = float(np.max(np.abs(point.r), initial=0.0))
        gradient = problem.jt_product(point.jac, point.r)
        if inf_pr > 1e-4 and np.max(np.abs(gradient), initial=0.0) <= 1e-6 * inf_pr:
            return SolveStatus.INFEASIBLE_DETECTED
        return SolveStatus.RESTORATION_FAILED

    # ------------------------------------------------------------------
    # Reports
    # ------------------------------------------------------------------

    def _phase_timings(self, started: float) -> PhaseTimings:
        return PhaseTimings(total=time.perf_counter() - started, **self._timings)

    def _failed_start(self, exc: EvaluationError, started: float) -> Solution:
        logger.warning("start_point_evaluation_failed", error=str(exc))
        return Solution(
            status=SolveStatus.EVAL_ERROR,
            objective=float("nan"),
            iterations=0,
            x=list(self.nlp.x_start),
            theta=float("nan"),
            residuals=KktResiduals(
                stationarity=float("nan"),
                feasibility=float("nan"),
                complementarity=float("nan"),
                scaled_error=float("nan"),
            ),
            timings=self._phase_timings(started),
            message=str(exc),
        )

    def _finish(
        self,
        problem: BarrierProblem,
        state: IpmState,
        point: Optional[_Point],
        status: Optional[SolveStatus],
        message: Optional[str],
        started: float,
    ) -> Solution:
        nlp = self.nlp
        scaling = problem.scaling
        sf = scaling.objective
        status = status or SolveStatus.MAX_ITER
        x = problem.x_full(state.w)
        if point is not None:
            residuals = self._residuals(
                problem, point, self._errors(problem, state, point, 0.0)
            )
            objective = nlp.objective_sign * point.f / sf
        else:
            objective = float("nan")
            residuals = KktResiduals(
                stationarity=float("nan"),
                feasibility=float("nan"),
                complementarity=float("nan"),
                scaled_error=float("nan"),
            )
        z_lower = np.zeros(nlp.nvar)
        z_upper = np.zeros(nlp.nvar)
        z_lower[problem.free] = state.z_lower[: problem.n_free] / sf
        z_upper[problem.free] = state.z_upper[: problem.n_free] / sf
        solution = Solution(
            status=status,
            objective=float(objective),
            iterations=state.iteration,
            x=x.tolist(),
            multipliers=(state.lam * scaling.rows / sf).tolist(),
            bound_duals_lower=z_lower.tolist(),
            bound_duals_upper=z_upper.tolist(),
            theta=residuals.feasibility,
            residuals=residuals,
            timings=self._phase_timings(started),
            final_mu=state.mu,
            counters=dict(state.counters),
            message=message,
        )
        logger.info(
            "ipm_finished",
            problem=nlp.name,
            status=status.value,
            iterations=state.iteration,
            objective=solution.objective,
            scaled_error=residuals.scaled_error,
        )
        return solution


def solve(
    nlp: StructuredNlp,
    options: Optional[IpmOptions] = None,
    backend: Optional[Backend] = None,
    callback: Optional[IterationCallback] = None,
) -> Solution:
    """Solve ``nlp`` from its start point."""
    return InteriorPointSolver(nlp, options, backend, callback).solve()
