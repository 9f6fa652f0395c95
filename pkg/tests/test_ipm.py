"""Tests for the interior-point solver."""

import itertools

import numpy as np
import pytest

from octrans.backends import ParallelBackend, SerialBackend
from octrans.bench import REFERENCE_OBJECTIVES
from octrans.dsl import parse_ocp
from octrans.ipm import (
    Filter,
    InertiaCorrector,
    InteriorPointSolver,
    KktSystem,
    fraction_to_boundary,
    gradient_scale,
    scale_problem,
    solve,
)
from octrans.linalg import analyze
from octrans.models.schemas import IpmOptions, SolveStatus
from octrans.transcription import transcribe

from .conftest import INTERIOR_MINIMUM, VARIABLE_ONLY

STEEP = """\
p in R, variable
t in [0, 1], time
x in R, state
x(0) == 0
derivative(x)(t) == 0
1000 * x(1) <= 1
1000 * p^2 => min
"""

BAD_START = """\
t in [0, 1], time
x in R, state
u in R, control
x(0) == 0
derivative(x)(t) == u(t)
integral(log(u(t) - 1)) => min
"""

NEGATIVE_SLOPE = """\
p in R, variable
t in [0, 1], time
x in R, state
x(0) == 0
derivative(x)(t) == 0
-1 <= p <= 1
p^2 + 3p => min
"""

SQUARE_ROOT = """\
p in R, variable
t in [0, 1], time
x in R, state
x(0) == 0
derivative(x)(t) == 0
p^2 == 4
0 <= p <= 10
p => min
"""


def _planted_box_qp(rng, k):
    """Strictly convex box QP with a known, strictly complementary optimum."""
    M = rng.normal(size=(k, k))
    Q = M @ M.T + np.eye(k)
    lower = rng.uniform(-2.0, -0.5, k)
    upper = rng.uniform(0.5, 2.0, k)
    status = rng.integers(0, 3, k)
    inside = rng.uniform(lower + 0.2, upper - 0.2)
    x = np.where(status == 1, lower, np.where(status == 2, upper, inside))
    duals = rng.uniform(0.5, 2.0, k)
    z = np.where(status == 1, duals, 0.0) - np.where(status == 2, duals, 0.0)
    c = z - Q @ x
    return Q, c, lower, upper, x


def _enumerate_box_qp(Q, c, lower, upper):
    """Minimize over every free / at-lower / at-upper assignment."""
    best_value, best_x = np.inf, None
    for pattern in itertools.product((0, 1, 2), repeat=len(c)):
        pattern = np.array(pattern)
        x = np.where(pattern == 1, lower, upper)
        free = pattern == 0
        if free.any():
            fixed = ~free
            rhs = -(c[free] + Q[np.ix_(free, fixed)] @ x[fixed])
            x[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
            if np.any(x < lower - 1e-12) or np.any(x > upper + 1e-12):
                continue
        value = 0.5 * x @ Q @ x + c @ x
        if value < best_value:
            best_value, best_x = value, x
    return best_x


def _box_qp_source(Q, c, lower, upper):
    k = len(c)
    terms = []
    for i in range(k):
        terms.append(f"{float(0.5 * Q[i, i])!r} * p{i + 1}^2")
        for j in range(i + 1, k):
            terms.append(f"({float(Q[i, j])!r}) * p{i + 1} * p{j + 1}")
        terms.append(f"({float(c[i])!r}) * p{i + 1}")
    lines = [
        f"p in R^{k}, variable",
        "t in [0, 1], time",
        "x in R, state",
        "x(0) == 0",
        "derivative(x)(t) == 0",
    ]
    lines += [
        f"{float(lower[i])!r} <= p{i + 1} <= {float(upper[i])!r}" for i in range(k)
    ]
    lines.append(" + ".join(terms) + " => min")
    return "\n".join(lines) + "\n"


class TestKkt:
    """Augmented system assembly."""

    def test_barrier_diagonal(self):
        # W = 3, z = 2 at distance 0.5 gives sigma = 4
        kkt = KktSystem(1, 0, np.array([0]), np.array([0]), np.array([]), np.array([]))
        matrix = kkt.assemble(np.array([3.0]), np.array([]), np.array([4.0]))
        np.testing.assert_array_equal(matrix.to_dense(), [[7.0]])

    def test_regularization_entries(self):
        kkt = KktSystem(
            1, 1, np.array([0]), np.array([0]), np.array([0]), np.array([0])
        )
        matrix = kkt.assemble(
            np.array([2.0]), np.array([1.0]), np.array([0.5]), delta_w=0.1, delta_c=0.01
        )
        np.testing.assert_allclose(matrix.to_dense(), [[2.6, 1.0], [1.0, -0.01]])

    def test_pattern_has_full_diagonal(self):
        kkt = KktSystem(
            3, 1, np.array([1]), np.array([0]), np.array([0]), np.array([2])
        )
        pattern = kkt.pattern()
        assert pattern.nnz == 4 + 2
        assert kkt.dim == 4

    def test_corrector_accepts_tiny_dual_pivot(self):
        # a large barrier term leaves a dual pivot of -1e-10
        kkt = KktSystem(
            1, 1, np.array([0]), np.array([0]), np.array([0]), np.array([0])
        )
        matrix = kkt.assemble(np.array([0.0]), np.array([1.0]), np.array([1e10]))
        corrector = InertiaCorrector(IpmOptions())
        symbolic = analyze(kkt.pattern(), "natural")
        factor = corrector.factorize(matrix, symbolic, 1, 1, 1e-9, 1.0)
        assert factor.inertia == (1, 1, 0)
        assert factor.delta_w == factor.delta_c == 0.0
        assert corrector.counters["factorizations"] == 1

    def test_jacobian_shift_clears_the_pivot_threshold(self):
        kkt = KktSystem(
            1, 1, np.array([0]), np.array([0]), np.array([0]), np.array([0])
        )
        matrix = kkt.assemble(np.array([1.0]), np.array([0.0]), np.array([0.0]))
        corrector = InertiaCorrector(IpmOptions())
        symbolic = analyze(kkt.pattern(), "natural")
        factor = corrector.factorize(matrix, symbolic, 1, 1, 1e-9, 1e8)
        assert factor.inertia == (1, 1, 0)
        assert factor.delta_w == 0.0
        assert factor.delta_c == pytest.approx(1e-4)
        assert factor.delta_c > factor.threshold

    def test_hessian_regularization_schedule(self):
        kkt = KktSystem(1, 0, np.array([0]), np.array([0]), np.array([]), np.array([]))
        matrix = kkt.assemble(np.array([-1.0]), np.array([]), np.array([0.0]))
        corrector = InertiaCorrector(IpmOptions())
        symbolic = analyze(kkt.pattern())
        # 1e-4, 1e-2 and 1 leave W + delta_w <= 0
        first = corrector.factorize(matrix, symbolic, 1, 0, 0.1)
        assert first.delta_w == pytest.approx(100.0)
        assert first.inertia == (1, 0, 0)
        second = corrector.factorize(matrix, symbolic, 1, 0, 0.1)
        assert second.delta_w == pytest.approx(100.0 / 3.0)
        assert corrector.counters["inertia_corrections"] == 2
        assert corrector.counters["factorizations"] == 5 + 2


class TestFilter:
    """Acceptance and dominance."""

    def test_reset_bounds_violation(self):
        f = Filter()
        f.reset(10.0)
        assert f.acceptable(5.0, 1e9)
        assert not f.acceptable(10.0, 0.0)

    def test_margins(self):
        f = Filter()
        f.reset(10.0)
        f.add(1.0, 2.0)
        assert f.acceptable(0.5, 100.0)
        assert f.acceptable(1.0, 1.0)
        assert not f.acceptable(1.0, 3.0)

    def test_dominated_entries_removed(self):
        f = Filter()
        f.reset(10.0)
        f.add(1.0, 2.0)
        f.add(0.5, 1.0)
        assert len(f) == 2
        assert not f.acceptable(0.6, 1.5)


class TestStepRules:
    """Fraction to the boundary and scaling factors."""

    def test_fraction_to_boundary(self):
        values = np.array([1.0, 2.0, 0.5])
        step = np.array([-2.0, 1.0, -100.0])
        mask = np.array([True, True, False])
        assert fraction_to_boundary(values, step, mask, 0.99) == pytest.approx(0.495)

    def test_full_step_when_nothing_shrinks(self):
        values = np.ones(3)
        assert fraction_to_boundary(values, np.ones(3), np.ones(3, bool), 0.99) == 1.0

    @pytest.mark.parametrize(
        "norm,expected", [(1e4, 1e-2), (100.0, 1.0), (1.0, 1.0), (0.0, 1.0)]
    )
    def test_gradient_scale(self, norm, expected):
        assert gradient_scale(norm) == pytest.approx(expected)

    def test_scale_problem(self):
        nlp = transcribe(parse_ocp(STEEP), grid_size=2)
        scaling = scale_problem(nlp)
        assert scaling.objective == pytest.approx(0.5)
        np.testing.assert_allclose(scaling.rows, [1.0, 1.0, 1.0, 0.1])


class TestSmallProblems:
    """Problems with known solutions."""

    def test_active_lower_bound(self):
        nlp = transcribe(parse_ocp(VARIABLE_ONLY), grid_size=4)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.x[0] == pytest.approx(1.0, abs=1e-6)
        assert solution.objective == pytest.approx(1.0, abs=1e-6)
        assert solution.bound_duals_lower[0] == pytest.approx(2.0, rel=1e-4)
        assert len(solution.bound_duals_upper) == nlp.nvar

    def test_active_bound_with_negative_slope(self):
        nlp = transcribe(parse_ocp(NEGATIVE_SLOPE), grid_size=4)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.x[0] == pytest.approx(-1.0, abs=1e-7)
        assert solution.objective == pytest.approx(-2.0, abs=1e-7)
        assert solution.bound_duals_lower[0] == pytest.approx(1.0, rel=1e-4)
        assert solution.bound_duals_upper[0] == pytest.approx(0.0, abs=1e-6)

    def test_nonlinear_equality(self):
        nlp = transcribe(parse_ocp(SQUARE_ROOT), grid_size=2)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.x[0] == pytest.approx(2.0, abs=1e-7)
        assert solution.objective == pytest.approx(2.0, abs=1e-7)

    def test_interior_minimum(self):
        nlp = transcribe(parse_ocp(INTERIOR_MINIMUM), grid_size=4)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.x[0] == pytest.approx(2.0, abs=1e-6)
        assert solution.objective == pytest.approx(0.0, abs=1e-8)

    def test_steep_problem_reports_unscaled_values(self):
        nlp = transcribe(parse_ocp(STEEP), grid_size=2)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective == pytest.approx(0.0, abs=1e-6)
        assert solution.residuals.feasibility <= 1e-6

    def test_start_point_domain_error(self):
        nlp = transcribe(parse_ocp(BAD_START), grid_size=4)
        solution = solve(nlp)
        assert solution.status == SolveStatus.EVAL_ERROR
        assert solution.iterations == 0
        assert "non-finite" in solution.message


class TestBoxQuadraticPrograms:
    """Random strictly convex box QPs against an enumeration of active sets."""

    def test_matches_enumeration(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 6))
            Q, c, lower, upper, planted = _planted_box_qp(rng, k)
            expected = _enumerate_box_qp(Q, c, lower, upper)
            np.testing.assert_allclose(expected, planted, atol=1e-9)

            source = _box_qp_source(Q, c, lower, upper)
            nlp = transcribe(parse_ocp(source), grid_size=2)
            solution = solve(nlp)
            assert solution.status == SolveStatus.OPTIMAL, source
            found = nlp.unpack(np.array(solution.x))["p"]
            np.testing.assert_allclose(found, expected, atol=1e-7, err_msg=source)


class TestRestoration:
    """Feasibility restoration."""

    def test_reduces_violation_from_the_start_point(self):
        nlp = transcribe(parse_ocp(SQUARE_ROOT), grid_size=2)
        solver = InteriorPointSolver(nlp, backend=SerialBackend(chunk_size=16))
        problem, state = solver._setup()
        kkt = KktSystem.for_problem(problem)
        symbolic = analyze(kkt.pattern())
        corrector = InertiaCorrector(solver.options, counters=state.counters)
        start = solver._evaluate(problem, state.w)
        state.filter.reset(1e4 * max(1.0, start.theta))

        restored, point = solver._restore(
            problem, kkt, symbolic, corrector, state, start
        )
        assert restored
        assert point.theta <= 0.9 * start.theta
        np.testing.assert_allclose(point.r, problem.residual(state.w))
        dl, du = problem.distances(state.w)
        assert np.all(dl > 0.0) and np.all(du > 0.0)
        assert np.all(state.z_lower[problem.has_lower] > 0.0)
        assert state.counters["restorations"] == 1
        assert state.iteration == state.counters["restoration_iterations"] >= 1

    def test_disabled_restoration_still_solves_feasible_starts(self):
        nlp = transcribe(parse_ocp(VARIABLE_ONLY), grid_size=4)
        solution = solve(nlp, IpmOptions(restoration=False))
        assert solution.status == SolveStatus.OPTIMAL
        assert "restorations" not in solution.counters


class TestDoubleIntegrator:
    """Full solves of the double integrator."""

    def test_optimal(self, double_integrator):
        nlp = transcribe(double_integrator, grid_size=100)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective == pytest.approx(6.0, abs=1e-2)
        assert solution.theta <= 1e-6
        assert solution.counters["analyze_calls"] == 1
        assert solution.counters["l_nnz"] > 0
        assert solution.counters["kkt_nnz"] > 0
        u = nlp.unpack(np.array(solution.x))["u"]
        assert u[0] == pytest.approx(6.0, abs=0.2)
        assert u[-1] == pytest.approx(-6.0, abs=0.2)
        assert len(solution.multipliers) == nlp.m_con

    @pytest.mark.parametrize("n", [10, 20, 40, 80])
    def test_discrete_optimum(self, double_integrator, n):
        # trapezoid optimum: u linear inside, endpoint controls pulled in by h/2
        h = 1.0 / n
        expected = 6.0 / (1.0 - 4.0 * h**2 + 3.0 * h**3)
        solution = solve(transcribe(double_integrator, grid_size=n))
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective == pytest.approx(expected, rel=1e-6)

    def test_second_order_convergence(self, double_integrator):
        sizes = [10, 20, 40, 80]
        errors = [
            solve(transcribe(double_integrator, grid_size=n)).objective - 6.0
            for n in sizes
        ]
        slope, _ = np.polyfit(np.log(sizes), np.log(errors), 1)
        assert -slope >= 1.9

    def test_iteration_callback(self, double_integrator):
        nlp = transcribe(double_integrator, grid_size=20)
        seen = []
        solution = solve(nlp, callback=seen.append)
        assert seen
        iterations = [info.iteration for info in seen]
        assert iterations == sorted(iterations)
        assert iterations[-1] == solution.iterations

    def test_iteration_cap(self, double_integrator):
        nlp = transcribe(double_integrator, grid_size=20)
        solution = solve(nlp, IpmOptions(max_iter=1))
        assert solution.status == SolveStatus.MAX_ITER
        assert solution.iterations == 1

    def test_backends_take_identical_steps(self, double_integrator):
        nlp = transcribe(double_integrator, grid_size=200)
        serial = solve(nlp, backend=SerialBackend(chunk_size=16))
        with ParallelBackend(workers=4, chunk_size=16) as backend:
            parallel = solve(nlp, backend=backend)
        assert serial.iterations == parallel.iterations
        assert serial.objective == parallel.objective
        assert serial.x == parallel.x

    @pytest.mark.slow
    def test_fine_grid(self, double_integrator):
        nlp = transcribe(double_integrator, grid_size=1000)
        solution = solve(nlp)
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective == pytest.approx(6.0, abs=1e-3)


class TestBundledSolves:
    """Solves of the larger bundled problems."""

    def test_goddard(self, goddard):
        solution = solve(transcribe(goddard, grid_size=100))
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective == pytest.approx(
            REFERENCE_OBJECTIVES["goddard"], abs=1e-3
        )

    def test_quadrotor(self, quadrotor):
        solution = solve(transcribe(quadrotor, grid_size=100))
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective > 0.0

    @pytest.mark.parametrize("fixture", ["double_integrator", "goddard", "quadrotor"])
    def test_residuals_within_tolerance(self, request, fixture):
        options = IpmOptions()
        nlp = transcribe(request.getfixturevalue(fixture), grid_size=100)
        solution = solve(nlp, options)
        assert solution.status == SolveStatus.OPTIMAL
        bound = 10.0 * options.tol
        assert solution.residuals.stationarity <= bound
        assert solution.residuals.feasibility <= bound
        assert solution.residuals.complementarity <= bound

    def test_goddard_backend_parity(self, goddard):
        nlp = transcribe(goddard, grid_size=100)
        serial = solve(nlp, backend=SerialBackend(chunk_size=16))
        with ParallelBackend(workers=4, chunk_size=16) as backend:
            parallel = solve(nlp, backend=backend)
        assert serial.iterations == parallel.iterations
        assert serial.objective == parallel.objective

    @pytest.mark.slow
    def test_goddard_fine_grid(self, goddard):
        solution = solve(transcribe(goddard, grid_size=1000))
        assert solution.status == SolveStatus.OPTIMAL
        assert solution.objective == pytest.approx(
            REFERENCE_OBJECTIVES["goddard"], abs=1e-3
        )

    @pytest.mark.slow
    @pytest.mark.parametrize("fixture", ["goddard", "quadrotor"])
    def test_objective_is_grid_independent(self, request, fixture):
        problem = request.getfixturevalue(fixture)
        coarse = solve(transcribe(problem, grid_size=250))
        fine = solve(transcribe(problem, grid_size=1000))
        assert coarse.status == fine.status == SolveStatus.OPTIMAL
        drift = abs(coarse.objective - fine.objective)
        assert drift <= 1e-3 * (1.0 + abs(fine.objective))
