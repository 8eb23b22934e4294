import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgkit.core import DgpInstance, Edge
from dgkit.errors import ConvergenceError, DimensionMismatch, IntervalEdgePresent, NotPsd, RankExceedsK
from dgkit.linalg import (barvinok_bound, edmcp_residual, eigen_sym, gram_from_sqedm, is_psd,
                          numerical_rank, realize_from_gram, singular_values, sqedm_from_realization)


class TestSqedm:
    def test_line(self):
        assert np.array_equal(sqedm_from_realization(np.array([[0.0], [1.0]])), [[0, 1], [1, 0]])

    def test_345(self):
        assert np.array_equal(sqedm_from_realization(np.array([[0.0, 0], [3, 4]])), [[0, 25], [25, 0]])

    def test_right_triangle(self):
        D = sqedm_from_realization(np.array([[0.0, 0], [1, 0], [0, 1]]))
        assert sorted(D[np.triu_indices(3, 1)]) == [1, 1, 2]


class TestGram:
    def test_zero(self):
        assert np.array_equal(gram_from_sqedm(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_two_points(self):
        assert np.allclose(gram_from_sqedm(np.array([[0.0, 1], [1, 0]])), [[0.25, -0.25], [-0.25, 0.25]])

    def test_trace(self):
        D = sqedm_from_realization(np.array([[0.0, 0], [3, 4]]))
        assert np.trace(gram_from_sqedm(D)) == pytest.approx(12.5)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_row_sums_vanish(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-9, 9, (int(rng.integers(2, 20)), 3))
        D = sqedm_from_realization(x)
        B = gram_from_sqedm(D)
        assert np.abs(B.sum(axis=1)).max() < 1e-10


class TestEigen:
    def test_identity(self):
        assert np.allclose(eigen_sym(np.eye(2)).eigenvalues, [1, 1])

    def test_swap(self):
        assert np.allclose(eigen_sym(np.array([[0.0, 1], [1, 0]])).eigenvalues, [1, -1])

    def test_rank_one(self):
        assert np.allclose(eigen_sym(np.array([[0.25, -0.25], [-0.25, 0.25]])).eigenvalues, [0.5, 0], atol=1e-15)

    def test_sign_convention(self):
        V = eigen_sym(np.array([[2.0, 1, 0], [1, 2, 1], [0, 1, 2]])).eigenvectors
        for j in range(3):
            col = V[:, j]
            assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0

    def test_convergence_cap(self):
        A = np.random.default_rng(0).standard_normal((6, 6))
        with pytest.raises(ConvergenceError):
            eigen_sym(A + A.T, max_sweeps=1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 50))
    def test_reconstruction(self, seed, n):
        A = np.random.default_rng(seed).standard_normal((n, n))
        A = A + A.T
        eig = eigen_sym(A)
        spec = np.abs(np.linalg.eigvalsh(A)).max()
        assert np.abs(eig.reconstruct() - A).max() < 1e-10 * max(spec, 1e-300)
        assert np.allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(n), atol=1e-10)
        assert np.all(np.diff(eig.eigenvalues) <= 0)

    def test_matches_lapack(self):
        A = np.random.default_rng(3).standard_normal((12, 12))
        A = A + A.T
        assert np.allclose(eigen_sym(A).eigenvalues, np.linalg.eigvalsh(A)[::-1], atol=1e-10)


class TestPsd:
    def test_identity(self):
        assert is_psd(np.eye(3))

    def test_indefinite(self):
        assert not is_psd(np.array([[0.0, 1], [1, 0]]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_gram_of_realization(self, seed, K):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((int(rng.integers(1, 15)), K))
        B = gram_from_sqedm(sqedm_from_realization(x))
        assert is_psd(B)
        assert numerical_rank(B) <= K


class TestRealize:
    def test_zero(self):
        assert np.array_equal(realize_from_gram(np.zeros((3, 3)), 1).coords, np.zeros((3, 1)))

    def test_rank_one(self):
        x = realize_from_gram(np.array([[1.0, -1], [-1, 1]]), 1).coords[:, 0]
        assert np.allclose(np.abs(x), [1, 1]) and x[0] == pytest.approx(-x[1])

    def test_rank_exceeds(self):
        x = np.random.default_rng(0).standard_normal((6, 3))
        with pytest.raises(RankExceedsK):
            realize_from_gram(gram_from_sqedm(sqedm_from_realization(x)), 2)

    def test_not_psd(self):
        with pytest.raises(NotPsd):
            realize_from_gram(np.array([[0.0, 1], [1, 0]]), 2)

    def test_zero_padding(self):
        x = np.array([[0.0, 0, 0], [1, 0, 0], [3, 0, 0]])
        y = realize_from_gram(gram_from_sqedm(sqedm_from_realization(x)), 3)
        assert np.allclose(y.coords[:, 1:], 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 5))
    def test_roundtrip(self, seed, n, K):
        x = np.random.default_rng(seed).standard_normal((n, K))
        D = sqedm_from_realization(x)
        y = realize_from_gram(gram_from_sqedm(D), K)
        assert np.abs(sqedm_from_realization(y) - D).max() < 1e-8


class TestRank:
    def test_zero(self):
        assert numerical_rank(np.zeros((3, 4))) == 0

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_identity(self, n):
        assert numerical_rank(np.eye(n)) == n

    def test_proportional_rows(self):
        assert numerical_rank(np.array([[1.0, 2], [2, 4]])) == 1

    def test_singular_values(self):
        M = np.random.default_rng(2).standard_normal((5, 3))
        assert np.allclose(singular_values(M), np.linalg.svd(M, compute_uv=False), atol=1e-12)

    def test_small_singular_value_kept(self):
        # a squared-matrix approach would lose 1e-9 below the 1e-10 threshold
        assert numerical_rank(np.diag([1.0, 1e-9])) == 2


class TestBarvinok:
    @pytest.mark.parametrize("m, k", [(1, 1), (3, 2), (10, 4), (2, 1), (6, 3)])
    def test_values(self, m, k):
        assert barvinok_bound(m) == k


class TestResidual:
    def test_closed_loop(self):
        x = np.random.default_rng(5).standard_normal((5, 2))
        inst = DgpInstance.from_distances(2, 5, [(u, v, float(np.linalg.norm(x[u] - x[v])))
                                                 for u in range(5) for v in range(u + 1, 5)])
        B = gram_from_sqedm(sqedm_from_realization(x))
        assert edmcp_residual(B, inst) < 1e-9

    def test_zero_gram(self):
        assert edmcp_residual(np.zeros((2, 2)), DgpInstance.from_distances(1, 2, [(0, 1, 1.0)])) == 1.0

    def test_two_point_gram(self):
        B = np.array([[0.25, -0.25], [-0.25, 0.25]])
        assert edmcp_residual(B, DgpInstance.from_distances(1, 2, [(0, 1, 1.0)])) == 0.0

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            edmcp_residual(np.zeros((3, 3)), DgpInstance.from_distances(1, 2, [(0, 1, 1.0)]))
        with pytest.raises(IntervalEdgePresent):
            edmcp_residual(np.zeros((2, 2)), DgpInstance(2, 1, (Edge(0, 1, dl=1.0, du=2.0),)))
