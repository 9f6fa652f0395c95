"""Tests for sparse symmetric storage, orderings and LDL^T."""

import numpy as np
import pytest
import scipy.io

from octrans.core.exceptions import (
    ConfigurationException,
    FactorizationException,
    InvariantViolation,
)
from octrans.linalg import (
    OrderingFactory,
    SparseSym,
    analyze,
    factorize,
    fill_in,
    refine,
    solve,
    write_matrix_market,
)


def _eigen_inertia(dense, tol=1e-10):
    eig = np.linalg.eigvalsh(dense)
    return (
        int(np.sum(eig > tol)),
        int(np.sum(eig < -tol)),
        int(np.sum(np.abs(eig) <= tol)),
    )


def _quasi_definite(rng, n_primal=8, m=4, density=0.4):
    """``[[H, J^T], [J, -I]]`` with H positive definite and J sparse."""
    mask = rng.random((n_primal, n_primal)) < density
    M = rng.normal(size=(n_primal, n_primal)) * mask
    H = M @ M.T + np.eye(n_primal)
    J = rng.normal(size=(m, n_primal)) * (rng.random((m, n_primal)) < density)
    top = np.hstack([H, J.T])
    bottom = np.hstack([J, -np.eye(m)])
    return np.vstack([top, bottom])


def _arrowhead(n):
    dense = np.eye(n) * 4.0
    dense[0, :] = dense[:, 0] = 1.0
    dense[0, 0] = float(n)
    return dense


class TestSparseSym:
    """Lower-triangle storage."""

    def test_from_coo_sums_and_mirrors(self):
        rows, cols = np.array([0, 1, 0]), np.array([0, 0, 1])
        A = SparseSym.from_coo(2, rows, cols, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(A.to_dense(), [[1.0, 5.0], [5.0, 0.0]])
        assert A.nnz == 2
        assert A.norm_inf() == 6.0
        assert A.norm_max() == 5.0
        np.testing.assert_array_equal(A.matvec(np.array([1.0, 2.0])), [11.0, 5.0])

    def test_shifted_adds_missing_diagonal(self):
        A = SparseSym.from_coo(2, np.array([1]), np.array([0]), np.array([5.0]))
        B = A.shifted(np.array([1.0, 2.0]))
        np.testing.assert_array_equal(B.to_dense(), [[1.0, 5.0], [5.0, 2.0]])
        assert B.nnz == 3

    def test_from_dense_keeps_diagonal(self):
        A = SparseSym.from_dense(np.zeros((3, 3)))
        assert A.nnz == 3

    def test_out_of_range_coordinate(self):
        with pytest.raises(InvariantViolation):
            SparseSym.from_coo(2, np.array([2]), np.array([0]), np.array([1.0]))

    def test_matrix_market_export(self, tmp_path):
        A = SparseSym.from_dense(_arrowhead(5))
        path = write_matrix_market(tmp_path / "kkt" / "a.mtx", A)
        assert path.exists()
        loaded = scipy.io.mmread(str(path)).toarray()
        np.testing.assert_array_equal(loaded, A.to_dense())


class TestOrderings:
    """Fill-reducing orderings."""

    def test_amd_is_a_permutation(self, rng):
        A = SparseSym.from_dense(_quasi_definite(rng))
        perm = OrderingFactory.create_ordering("amd")(A)
        np.testing.assert_array_equal(np.sort(perm), np.arange(A.n))

    def test_arrowhead_fill(self):
        n = 100
        A = SparseSym.from_dense(_arrowhead(n))
        natural = analyze(A, ordering="natural")
        amd = analyze(A, ordering="amd")
        assert natural.l_nnz == n * (n - 1) // 2
        assert fill_in(natural) == n * (n - 1) // 2 - (n - 1)
        assert amd.l_nnz < natural.l_nnz // 10

    def test_unknown_ordering(self):
        with pytest.raises(ConfigurationException, match="unknown ordering 'metis'"):
            OrderingFactory.create_ordering("metis")

    def test_available(self):
        assert OrderingFactory.get_available_orderings() == ["amd", "natural"]


class TestFactorization:
    """Numeric LDL^T, inertia and solves."""

    def test_identity(self):
        A = SparseSym.from_dense(np.eye(4))
        factor = factorize(A, analyze(A))
        assert factor.inertia == (4, 0, 0)
        b = np.arange(4.0)
        np.testing.assert_array_equal(solve(factor, b), b)

    def test_diagonal_inertia(self):
        A = SparseSym.from_dense(np.diag([2.0, -3.0, 5.0]))
        assert factorize(A, analyze(A)).inertia == (2, 1, 0)

    def test_saddle_point(self):
        A = SparseSym.from_dense(np.array([[1.0, 1.0], [1.0, 0.0]]))
        factor = factorize(A, analyze(A, ordering="natural"))
        assert factor.inertia == (1, 1, 0)
        np.testing.assert_allclose(solve(factor, np.array([1.0, 1.0])), [1.0, 0.0])

    def test_regularization_shifts(self):
        A = SparseSym.from_dense(np.array([[1.0, 1.0], [1.0, 0.0]]))
        factor = factorize(A, analyze(A), delta_w=1.0, delta_c=0.5, n_primal=1)
        np.testing.assert_array_equal(
            factor.matrix.to_dense(), [[2.0, 1.0], [1.0, -0.5]]
        )
        assert factor.inertia == (1, 1, 0)

    def test_shift_does_not_raise_pivot_threshold(self):
        A = SparseSym.from_dense(np.array([[1.0, 1.0], [1.0, 0.0]]))
        factor = factorize(
            A,
            analyze(A, ordering="natural"),
            delta_w=1e10,
            delta_c=1e-8,
            n_primal=1,
        )
        assert factor.threshold == pytest.approx(1e-14)
        assert factor.inertia == (1, 1, 0)

    def test_explicit_pivot_scale(self):
        dense = np.array([[1e10, 0.0, 0.0], [0.0, 1e6, 1.0], [0.0, 1.0, 0.0]])
        A = SparseSym.from_dense(dense)
        symbolic = analyze(A, ordering="natural")
        assert factorize(A, symbolic, n_primal=2).zero_pivots == 1
        factor = factorize(A, symbolic, n_primal=2, pivot_scale=1.0)
        assert factor.threshold == pytest.approx(1e-14)
        assert factor.inertia == (2, 1, 0)

    @pytest.mark.parametrize("ordering", ["amd", "natural"])
    def test_quasi_definite_reconstruction(self, rng, ordering):
        dense = _quasi_definite(rng)
        A = SparseSym.from_dense(dense)
        factor = factorize(A, analyze(A, ordering=ordering))
        perm = factor.perm
        np.testing.assert_allclose(
            factor.reconstruct(), dense[np.ix_(perm, perm)], rtol=1e-10, atol=1e-10
        )
        assert factor.inertia == _eigen_inertia(dense) == (8, 4, 0)
        b = rng.normal(size=A.n)
        np.testing.assert_allclose(dense @ solve(factor, b), b, atol=1e-9)

    def test_random_quasi_definite_sweep(self, rng):
        for _ in range(100):
            n_primal = int(rng.integers(2, 70))
            m = int(rng.integers(1, 31))
            dense = _quasi_definite(rng, n_primal, m, density=rng.uniform(0.05, 0.5))
            A = SparseSym.from_dense(dense)
            factor = factorize(A, analyze(A))
            perm = factor.perm
            error = np.max(np.abs(factor.reconstruct() - dense[np.ix_(perm, perm)]))
            assert error <= 1e-10 * A.norm_max()
            assert factor.inertia == _eigen_inertia(dense) == (n_primal, m, 0)

    def test_indefinite_inertia_matches_eigenvalues(self, rng):
        M = rng.normal(size=(10, 10))
        dense = M + M.T
        A = SparseSym.from_dense(dense)
        factor = factorize(A, analyze(A))
        assert factor.inertia == _eigen_inertia(dense)

    def test_zero_pivot_refuses_solve(self):
        A = SparseSym.from_dense(np.ones((2, 2)))
        factor = factorize(A, analyze(A, ordering="natural"))
        assert factor.zero_pivots == 1
        with pytest.raises(FactorizationException) as excinfo:
            solve(factor, np.ones(2))
        assert excinfo.value.zero_pivots == 1

    def test_pattern_mismatch(self):
        A = SparseSym.from_dense(np.eye(3))
        B = SparseSym.from_dense(_arrowhead(3))
        with pytest.raises(InvariantViolation):
            factorize(B, analyze(A))

    def test_refinement_recovers_unregularized_solution(self, rng):
        dense = np.diag([1.0, 2.0, 4.0, 8.0]) + 0.1
        A = SparseSym.from_dense(dense)
        factor = factorize(A, analyze(A), delta_w=1e-3)
        b = rng.normal(size=4)
        x = refine(A, factor, b, max_rounds=20)
        np.testing.assert_allclose(dense @ x, b, atol=1e-10)
        plain = solve(factor, b)
        assert np.max(np.abs(dense @ plain - b)) > 1e-6
