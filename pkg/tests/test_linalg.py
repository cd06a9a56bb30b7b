import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spd, random_symmetric
from embreduce import linalg
from embreduce.errors import InvalidInput, NotPositiveDefinite, NumericalFailure
from embreduce.linalg import cholesky, generalized_sym_eig, solve_lower, solve_upper_transposed, sym_eig
from oracles import bisection_eigenvalues, random_rayleigh_max

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@st.composite
def symmetric_matrices(draw, max_dim=8):
    p = draw(st.integers(1, max_dim))
    M = draw(arrays(np.float64, (p, p), elements=finite))
    return (M + M.T) / 2


class TestSymEig:
    def test_identity(self):
        res = sym_eig(np.eye(3))
        np.testing.assert_allclose(res.eigenvalues, [1, 1, 1], atol=1e-15)
        np.testing.assert_allclose(res.eigenvectors.T @ res.eigenvectors, np.eye(3), atol=1e-15)

    def test_diagonal(self):
        res = sym_eig(np.diag([1.0, 2.0]))
        np.testing.assert_array_equal(res.eigenvalues, [2.0, 1.0])
        np.testing.assert_allclose(res.eigenvectors, [[0, 1], [1, 0]], atol=1e-15)

    def test_matches_bisection_oracle(self):
        A = random_symmetric(np.random.default_rng(4), 4)
        np.testing.assert_allclose(sym_eig(A).eigenvalues, bisection_eigenvalues(A), rtol=0, atol=1e-8)

    def test_sign_convention(self):
        A = random_symmetric(np.random.default_rng(7), 6)
        V = sym_eig(A).eigenvectors
        for j in range(6):
            assert V[np.argmax(np.abs(V[:, j])), j] > 0

    def test_deterministic(self):
        A = random_symmetric(np.random.default_rng(8), 12)
        a, b = sym_eig(A), sym_eig(A.copy())
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)

    def test_one_by_one(self):
        res = sym_eig([[-3.5]])
        assert res.eigenvalues[0] == -3.5
        assert res.eigenvectors[0, 0] == 1.0

    def test_large_matrix(self):
        A = random_symmetric(np.random.default_rng(9), 120)
        res = sym_eig(A)
        V, lam = res.eigenvectors, res.eigenvalues
        assert np.max(np.abs(V.T @ V - np.eye(120))) <= 1e-8
        assert np.max(np.abs(A @ V - V * lam)) <= 1e-8 * max(1, np.abs(lam).max())

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInput):
            sym_eig([[1.0, np.nan], [np.nan, 1.0]])

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidInput):
            sym_eig([[1.0, 2.0], [0.0, 1.0]])

    def test_rejects_non_square(self):
        with pytest.raises(InvalidInput):
            sym_eig(np.zeros((2, 3)))

    def test_non_convergence_reports_iterations(self, monkeypatch):
        monkeypatch.setattr(linalg, "MAX_QL_ITERATIONS", 0)
        with pytest.raises(NumericalFailure) as info:
            sym_eig(random_symmetric(np.random.default_rng(1), 5))
        assert info.value.iterations == 0

    @settings(max_examples=150, deadline=None)
    @given(symmetric_matrices())
    def test_decomposition_properties(self, A):
        res = sym_eig(A)
        lam, V = res.eigenvalues, res.eigenvectors
        assert np.all(np.diff(lam) <= 0)
        assert np.max(np.abs(V.T @ V - np.eye(len(lam)))) <= 1e-8
        resid = np.linalg.norm(A @ V - V * lam, axis=0)
        assert np.all(resid <= 1e-8 * np.maximum(1, np.abs(lam)) * max(1, np.abs(A).max()))
        assert np.max(np.abs(V @ np.diag(lam) @ V.T - A)) <= 1e-7 * (1 + np.abs(A).max())
        assert abs(lam.sum() - np.trace(A)) <= 1e-9 * max(1.0, np.abs(lam).sum())


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(2)), np.eye(2))

    def test_two_by_two(self):
        np.testing.assert_allclose(cholesky([[4.0, 2.0], [2.0, 5.0]]), [[2, 0], [1, 2]], atol=1e-15)

    def test_reconstruction(self):
        A = random_spd(np.random.default_rng(6), 6)
        L = cholesky(A)
        assert np.allclose(L, np.tril(L))
        assert np.max(np.abs(L @ L.T - A)) <= 1e-9 * np.max(np.diag(A))

    def test_failing_pivot_index(self):
        A = np.diag([1.0, 2.0, -1.0, 4.0])
        with pytest.raises(NotPositiveDefinite) as info:
            cholesky(A)
        assert info.value.pivot == 2

    def test_rank_deficient(self):
        X = np.random.default_rng(0).standard_normal((3, 5))
        with pytest.raises(NotPositiveDefinite) as info:
            cholesky(X.T @ X)
        assert info.value.pivot == 3

    def test_triangular_solves(self):
        A = random_spd(np.random.default_rng(2), 5)
        L = cholesky(A)
        B = np.random.default_rng(3).standard_normal((5, 3))
        np.testing.assert_allclose(L @ solve_lower(L, B), B, atol=1e-12)
        np.testing.assert_allclose(L.T @ solve_upper_transposed(L, B), B, atol=1e-12)


class TestGeneralizedEig:
    def test_identity_metric(self):
        np.testing.assert_allclose(generalized_sym_eig(np.diag([3.0, 1.0]), np.eye(2)).eigenvalues, [3, 1])

    def test_diagonal_ratio(self):
        np.testing.assert_allclose(generalized_sym_eig(np.diag([4.0, 1.0]), np.diag([2.0, 1.0])).eigenvalues, [2, 1])

    def test_rayleigh_random_search(self):
        # The random search is a lower bound on the top eigenvalue: no sample
        # may beat it, and with 10**6 samples it comes within 1e-3.
        rng = np.random.default_rng(4)
        M = rng.standard_normal((5, 5))
        N = rng.standard_normal((5, 5))
        A, B = (M + M.T) / 4, N @ N.T / 5 + np.eye(5)
        top = generalized_sym_eig(A, B).eigenvalues[0]
        best = random_rayleigh_max(A, B, 10**6, seed=104)
        assert best <= top + 1e-12
        assert top - best <= 1e-3

    @pytest.mark.parametrize("seed", range(6))
    def test_rayleigh_upper_bound(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((5, 5))
        N = rng.standard_normal((5, 5))
        A, B = (M + M.T) / 4, N @ N.T / 5 + np.eye(5)
        top = generalized_sym_eig(A, B).eigenvalues[0]
        best = random_rayleigh_max(A, B, 10**5, seed=seed + 100)
        assert best <= top + 1e-12
        assert top - best <= 2e-2

    def test_pairs_and_b_orthonormality(self):
        rng = np.random.default_rng(11)
        A, B = random_symmetric(rng, 7), random_spd(rng, 7)
        res = generalized_sym_eig(A, B)
        lam, W = res.eigenvalues, res.eigenvectors
        assert np.all(np.diff(lam) <= 0)
        resid = np.abs(A @ W - B @ W * lam).max(axis=0)
        assert np.all(resid <= 1e-7 * np.maximum(1, np.abs(lam)))
        assert np.max(np.abs(W.T @ B @ W - np.eye(7))) <= 1e-7

    @settings(max_examples=60, deadline=None)
    @given(symmetric_matrices())
    def test_identity_metric_agrees_with_sym_eig(self, A):
        g = generalized_sym_eig(A, np.eye(A.shape[0]))
        s = sym_eig(A)
        scale = max(1.0, np.abs(A).max())
        np.testing.assert_allclose(g.eigenvalues, s.eigenvalues, rtol=0, atol=1e-9 * scale)
        gap = np.min(np.abs(np.diff(s.eigenvalues))) if A.shape[0] > 1 else np.inf
        if gap > 1e-3 * scale:
            # distinct eigenvalues: eigenvectors equal up to sign
            dots = np.abs(np.sum(g.eigenvectors * s.eigenvectors, axis=0))
            np.testing.assert_allclose(dots, 1.0, atol=1e-6)

    def test_singular_metric(self):
        with pytest.raises(NotPositiveDefinite):
            generalized_sym_eig(np.eye(2), np.diag([1.0, 0.0]))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            generalized_sym_eig(np.eye(2), np.eye(3))
