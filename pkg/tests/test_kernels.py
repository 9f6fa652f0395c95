"""Tests for kernel graphs, structural sparsity and derivative tapes."""

import threading
import tracemalloc

import numpy as np
import pytest

from octrans.core.exceptions import EvaluationError
from octrans.kernels import (
    KernelBuilder,
    KernelTape,
    Op,
    SlotInput,
    detect_sparsity,
    eval_hessian,
    eval_jacobian,
)
from octrans.transcription import transcribe

from .conftest import interior_point

FD_STEP = 1e-6


def half_square():
    b = KernelBuilder("half_square")
    u = b.input(SlotInput(0, 1, "u@i"))
    out = b.binary(Op.MUL, b.const(0.5), b.power(u, b.const(2.0)))
    return b.build([out])


def goddard_drag():
    """-Cd v^2 exp(-beta (r - 1)) / m over inputs (r, v, m)."""
    b = KernelBuilder("drag")
    r = b.input(SlotInput(0, 3, "r@i"))
    v = b.input(SlotInput(1, 3, "v@i"))
    m = b.input(SlotInput(2, 3, "m@i"))
    decay = b.unary(
        Op.EXP, b.binary(Op.MUL, b.const(-500.0), b.binary(Op.SUB, r, b.const(1.0)))
    )
    drag = b.binary(
        Op.MUL, b.binary(Op.MUL, b.const(-310.0), b.power(v, b.const(2.0))), decay
    )
    return b.build([b.binary(Op.DIV, drag, m)])


def fd_gradient(f, x, step=FD_STEP):
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def fd_jacobian(c, x, step=FD_STEP):
    columns = []
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        columns.append((c(x + e) - c(x - e)) / (2.0 * step))
    return np.column_stack(columns)


def dense_jacobian(nlp, x):
    rows, cols = nlp.jac_structure
    J = np.zeros((nlp.m_con, nlp.nvar))
    np.add.at(J, (rows, cols), nlp.jacobian(x))
    return J


def dense_hessian(nlp, x, y, sigma):
    rows, cols = nlp.hess_structure
    values = nlp.hessian(x, y, objective_weight=sigma)
    H = np.zeros((nlp.nvar, nlp.nvar))
    np.add.at(H, (rows, cols), values)
    off = rows != cols
    np.add.at(H, (cols[off], rows[off]), values[off])
    return H


def relative_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)), initial=0.0))


class TestKernelBuilder:
    """Graph construction."""

    def test_constants_fold(self):
        b = KernelBuilder("k")
        three = b.binary(Op.ADD, b.const(1.0), b.const(2.0))
        kernel = b.build([three])
        assert kernel.nodes[three].op == Op.CONST
        assert kernel.nodes[three].value == 3.0

    def test_shared_subexpressions(self):
        b = KernelBuilder("k")
        u = b.input(SlotInput(0, 1))
        again = b.input(SlotInput(0, 1))
        assert u == again
        assert b.unary(Op.SIN, u) == b.unary(Op.SIN, again)

    def test_double_negation_cancels(self):
        b = KernelBuilder("k")
        u = b.input(SlotInput(0, 1))
        assert b.unary(Op.NEG, b.unary(Op.NEG, u)) == u

    def test_prefix_dump(self):
        assert half_square().prefix() == "(* 0.5 (^ u@i 2.0))"

    def test_slot_matrix(self):
        b = KernelBuilder("k")
        b.input(SlotInput(4, 2))
        b.input(SlotInput(9, 0))
        kernel = b.build([0])
        np.testing.assert_array_equal(
            kernel.slot_matrix(np.array([0, 1, 2])), [[4, 6, 8], [9, 9, 9]]
        )


class TestSparsity:
    """Structural stencils."""

    def test_half_square(self):
        pattern = detect_sparsity(half_square())
        assert pattern.jac_nnz == 1
        assert pattern.hess_nnz == 1
        assert (pattern.hess_first[0], pattern.hess_second[0]) == (0, 0)

    def test_trapezoid_residual_is_linear(self):
        b = KernelBuilder("defect")
        x1, x1n = b.input(SlotInput(0, 2)), b.input(SlotInput(2, 2))
        x2, x2n = b.input(SlotInput(1, 2)), b.input(SlotInput(3, 2))
        half_h = b.const(0.25)
        out = b.binary(
            Op.SUB,
            b.binary(Op.SUB, x1n, x1),
            b.binary(Op.MUL, half_h, b.binary(Op.ADD, x2, x2n)),
        )
        pattern = detect_sparsity(b.build([out]))
        assert pattern.jac_nnz == 4
        assert pattern.hess_nnz == 0

    def test_drag_term_couples_all_pairs(self):
        pattern = detect_sparsity(goddard_drag())
        pairs = set(zip(pattern.hess_first.tolist(), pattern.hess_second.tolist()))
        assert pairs == {(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)}

    def test_cancellation_keeps_entry(self):
        b = KernelBuilder("k")
        u = b.input(SlotInput(0, 1))
        kernel = b.build([b.binary(Op.SUB, u, u)])
        assert detect_sparsity(kernel).jac_nnz == 1

    def test_global_coordinates(self):
        kernel = half_square()
        pattern = detect_sparsity(kernel)
        rows, cols = pattern.jacobian_coo(kernel, range(2, 5), row_offset=10)
        np.testing.assert_array_equal(rows, [10, 11, 12])
        np.testing.assert_array_equal(cols, [2, 3, 4])


class TestTapes:
    """Values and derivatives."""

    def test_half_square_gradient(self):
        tape = KernelTape(half_square())
        x = np.array([3.0])
        grad = tape.gradient(x, np.array([0]), np.ones(1))
        assert grad[0, 0] == pytest.approx(3.0)
        assert tape.values(x, np.array([0]))[0, 0] == pytest.approx(4.5)

    def test_constant_kernel(self):
        b = KernelBuilder("c")
        b.input(SlotInput(0, 1))
        tape = KernelTape(b.build([b.const(7.0)]))
        grad = tape.gradient(np.ones(3), np.arange(3), np.ones(3))
        np.testing.assert_array_equal(grad, np.zeros((3, 1)))
        assert tape.pattern.jac_nnz == 0

    def test_euler_residual_jacobian(self):
        b = KernelBuilder("euler")
        x0 = b.input(SlotInput(0, 1, "x@i"))
        x1 = b.input(SlotInput(1, 1, "x@i+1"))
        u0 = b.input(SlotInput(2, 1, "u@i"))
        out = b.binary(
            Op.SUB, b.binary(Op.SUB, x1, x0), b.binary(Op.MUL, b.const(0.1), u0)
        )
        tape = KernelTape(b.build([out]))
        x = np.array([1.0, 1.2, 2.0])
        assert tape.values(x, np.array([0]))[0, 0] == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(
            tape.jacobian(x, np.array([0]))[0], [-1.0, 1.0, -0.1]
        )

    def test_drag_hessian_matches_differences(self, rng):
        tape = KernelTape(goddard_drag())
        x = np.array([1.01, 0.05, 0.8])
        idx = np.array([0])

        def grad(z):
            return tape.gradient(z, idx, np.ones(1))[0]

        H = np.zeros((3, 3))
        values = tape.hessian(x, idx, np.ones((1, 1)))[0]
        pattern = tape.pattern
        for e in range(pattern.hess_nnz):
            i, j = pattern.hess_first[e], pattern.hess_second[e]
            H[i, j] = H[j, i] = values[e]
        H_fd = fd_jacobian(grad, x)
        np.testing.assert_allclose(H, H_fd, rtol=1e-5, atol=1e-6)

    def test_evaluation_is_deterministic(self, rng):
        tape = KernelTape(goddard_drag())
        x = rng.uniform(0.5, 1.0, 30)
        idx = np.arange(10)
        first = tape.jacobian(x, idx)
        second = tape.jacobian(x, idx)
        assert np.array_equal(first, second)

    def test_buffer_positions(self):
        tape = KernelTape(half_square())
        x = np.arange(6, dtype=float)
        out = np.full(6, -1.0)
        eval_jacobian(tape, x, range(2, 4), out, start=0)
        np.testing.assert_array_equal(out, [-1.0, -1.0, 2.0, 3.0, -1.0, -1.0])


class TestWorkspaces:
    """Compiled passes evaluate into reused per-thread buffers."""

    GRID = 2000

    def _buffers(self, tape, rng):
        x = rng.uniform(0.5, 1.0, 3 * self.GRID)
        jac = np.empty(self.GRID * tape.pattern.jac_nnz)
        hess = np.empty(self.GRID * tape.pattern.hess_nnz)
        weights = rng.normal(size=(self.GRID, 1))
        return x, jac, hess, weights

    def test_repeated_calls_do_not_grow_memory(self, rng):
        tape = KernelTape(goddard_drag())
        x, jac, hess, weights = self._buffers(tape, rng)
        block = range(self.GRID)
        eval_jacobian(tape, x, block, jac, 0)
        eval_hessian(tape, x, weights, block, hess, 0)
        allocations = tape.workspace_allocations
        assert allocations == 2

        tracemalloc.start()
        try:
            before, _ = tracemalloc.get_traced_memory()
            for _ in range(25):
                eval_jacobian(tape, x, block, jac, 0)
                eval_hessian(tape, x, weights, block, hess, 0)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        assert tape.workspace_allocations == allocations
        # less than a single float row of the block
        assert peak - before < 8 * self.GRID

    def test_buffered_results_match_block_evaluators(self, rng):
        tape = KernelTape(goddard_drag())
        x, jac, hess, weights = self._buffers(tape, rng)
        idx = np.arange(self.GRID)
        eval_jacobian(tape, x, range(self.GRID), jac, 0)
        eval_hessian(tape, x, weights, range(self.GRID), hess, 0)
        np.testing.assert_array_equal(jac, tape.jacobian(x, idx).reshape(-1))
        np.testing.assert_array_equal(hess, tape.hessian(x, idx, weights).reshape(-1))

    def test_each_thread_gets_its_own_workspace(self, rng):
        tape = KernelTape(goddard_drag())
        x, jac, _, _ = self._buffers(tape, rng)
        eval_jacobian(tape, x, range(self.GRID), jac, 0)
        other = np.empty_like(jac)
        worker = threading.Thread(
            target=eval_jacobian, args=(tape, x, range(self.GRID), other, 0)
        )
        worker.start()
        worker.join()
        assert tape.workspace_allocations == 2
        np.testing.assert_array_equal(jac, other)

    def test_registers_are_reused(self):
        program = KernelTape(goddard_drag()).program("hessian")
        written = sum(1 for *_, dest in program.code if dest[0] == "r")
        assert 0 < program.n_registers < written

    def test_unknown_pass(self):
        with pytest.raises(ValueError, match="unknown pass"):
            KernelTape(half_square()).program("laplacian")


class TestDomainErrors:
    """Non-finite results reject the evaluation."""

    @pytest.mark.parametrize(
        "op, value",
        [(Op.LOG, 0.0), (Op.LOG, -1.0), (Op.SQRT, -1.0)],
    )
    def test_unary_domain(self, op, value):
        b = KernelBuilder("bad")
        u = b.input(SlotInput(0, 1))
        tape = KernelTape(b.build([b.unary(op, u)]))
        with pytest.raises(EvaluationError):
            tape.values(np.array([value]), np.array([0]))

    def test_fractional_power_of_negative_base(self):
        b = KernelBuilder("bad")
        u = b.input(SlotInput(0, 1))
        tape = KernelTape(b.build([b.power(u, b.const(0.5))]))
        with pytest.raises(EvaluationError, match="bad"):
            tape.values(np.array([-4.0]), np.array([0]))

    def test_division_by_zero(self):
        b = KernelBuilder("bad")
        u = b.input(SlotInput(0, 1))
        tape = KernelTape(b.build([b.binary(Op.DIV, b.const(1.0), u)]))
        with pytest.raises(EvaluationError):
            tape.jacobian(np.array([0.0]), np.array([0]))


GODDARD_BOX = {
    "tf": (0.1, 0.2),
    "r": (1.01, 1.02),
    "v": (0.0, 0.1),
    "m": (0.6, 1.0),
    "u": (0.0, 1.0),
}
QUADROTOR_BOX = {"x8": (-0.5, 0.5)}


@pytest.mark.parametrize(
    "fixture, grid_size, boxes",
    [
        ("double_integrator", 5, None),
        ("goddard", 4, GODDARD_BOX),
        ("quadrotor", 3, QUADROTOR_BOX),
    ],
)
class TestTranscribedDerivatives:
    """AD against central differences on the bundled problems."""

    def _nlp(self, request, fixture, grid_size):
        return transcribe(request.getfixturevalue(fixture), grid_size=grid_size)

    def test_gradient(self, request, rng, fixture, grid_size, boxes):
        nlp = self._nlp(request, fixture, grid_size)
        for _ in range(3):
            x = interior_point(nlp, rng, boxes)
            g_fd = fd_gradient(nlp.objective, x)
            assert relative_error(nlp.gradient(x), g_fd) <= 1e-6

    def test_jacobian(self, request, rng, fixture, grid_size, boxes):
        nlp = self._nlp(request, fixture, grid_size)
        for _ in range(3):
            x = interior_point(nlp, rng, boxes)
            J_fd = fd_jacobian(nlp.evaluate_constraints, x)
            J = dense_jacobian(nlp, x)
            assert relative_error(J, J_fd) <= 1e-5

    def test_pattern_contains_numerical_nonzeros(
        self, request, rng, fixture, grid_size, boxes
    ):
        nlp = self._nlp(request, fixture, grid_size)
        x = interior_point(nlp, rng, boxes)
        J_fd = fd_jacobian(nlp.evaluate_constraints, x)
        structural = np.zeros_like(J_fd, dtype=bool)
        rows, cols = nlp.jac_structure
        structural[rows, cols] = True
        assert np.all(np.abs(J_fd[~structural]) <= 1e-12)

    def test_lagrangian_hessian(self, request, rng, fixture, grid_size, boxes):
        nlp = self._nlp(request, fixture, grid_size)
        x = interior_point(nlp, rng, boxes)
        y = rng.uniform(-1.0, 1.0, nlp.m_con)
        sigma = 0.7

        def lagrangian_gradient(z):
            rows, cols = nlp.jac_structure
            jt_y = np.zeros(nlp.nvar)
            np.add.at(jt_y, cols, nlp.jacobian(z) * y[rows])
            return sigma * nlp.gradient(z) + jt_y

        H = dense_hessian(nlp, x, y, sigma)
        H_fd = fd_jacobian(lagrangian_gradient, x)
        scale = max(1.0, float(np.max(np.abs(H_fd))))
        np.testing.assert_allclose(H, H_fd, rtol=1e-5, atol=1e-5 * scale)
        np.testing.assert_allclose(H, H.T)
