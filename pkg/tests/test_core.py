import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bowrefine.core import (
    BowMatrix,
    check_affinity,
    hik_similarity,
    knn_neighbors,
    linear_kernel,
    normalized_laplacian,
)

from oracles import dense_laplacian_elementwise


def random_affinity(rng, n, density=1.0):
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0)
    return W


class TestBowMatrix:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            BowMatrix(np.array([[1.0, -1.0]]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            BowMatrix(np.zeros((0, 3)))

    def test_default_ids(self):
        B = BowMatrix(np.ones((2, 3)))
        assert B.feature_ids == ("f0", "f1", "f2")
        assert B.n_images == 2 and B.n_features == 3

    def test_immutable(self):
        B = BowMatrix(np.ones((2, 2)))
        with pytest.raises(ValueError):
            B.values[0, 0] = 3


class TestLinearKernel:
    def test_identical_unit_rows(self):
        x = np.array([0.6, 0.8, 0.0])
        K = linear_kernel(np.vstack([x, x]))
        assert K[0, 1] == pytest.approx(1.0)

    def test_zero_row(self):
        X = np.array([[1.0, 2.0], [0.0, 0.0], [3.0, 1.0]])
        K = linear_kernel(X)
        assert np.all(K[1] == 0) and np.all(K[:, 1] == 0)

    def test_matches_bruteforce_dot(self):
        rng = np.random.default_rng(3)
        X = rng.random((5, 8))
        K = linear_kernel(X, row_normalize=False)
        for i in range(5):
            for j in range(5):
                assert K[i, j] == pytest.approx(sum(X[i, d] * X[j, d] for d in range(8)), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (6, 4), elements=st.floats(0, 10)))
    def test_normalized_bounds(self, X):
        K = linear_kernel(X, row_normalize=True)
        assert np.all(K >= 0) and np.all(K <= 1 + 1e-12)
        nonzero = np.linalg.norm(X, axis=1) > 0
        assert np.allclose(np.diag(K)[nonzero], 1.0)
        assert np.array_equal(K, K.T)


class TestNormalizedLaplacian:
    def test_two_vertex(self):
        L = normalized_laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(L.matrix, [[1, -1], [-1, 1]])

    def test_matches_elementwise(self):
        rng = np.random.default_rng(7)
        W = random_affinity(rng, 6)
        L = normalized_laplacian(W)
        assert np.allclose(L.matrix, dense_laplacian_elementwise(W), atol=1e-14)

    def test_null_vector_per_component(self):
        rng = np.random.default_rng(1)
        W = np.zeros((7, 7))
        W[:4, :4] = random_affinity(rng, 4)
        W[4:, 4:] = random_affinity(rng, 3)
        L = normalized_laplacian(W)
        v = np.sqrt(L.degrees)
        for comp in (slice(0, 4), slice(4, 7)):
            u = np.zeros(7)
            u[comp] = v[comp]
            assert np.allclose(L.matrix @ u, 0, atol=1e-12)

    def test_isolated_vertex_row_is_unit(self):
        W = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)
        L = normalized_laplacian(W)
        assert np.array_equal(L.matrix[2], [0, 0, 1])
        assert L.degrees[2] == 0

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(5)
        W = random_affinity(rng, 9, density=0.3)
        Ls = normalized_laplacian(sp.csr_matrix(W))
        assert sp.issparse(Ls.matrix)
        assert np.allclose(Ls.matrix.toarray(), normalized_laplacian(W).matrix)

    def test_psd_on_random_graphs(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(2, 12))
            W = random_affinity(rng, n, density=rng.uniform(0.1, 1.0))
            ev = np.linalg.eigvalsh(normalized_laplacian(W).matrix)
            assert ev.min() >= -1e-8


class TestKnn:
    def test_identity_ties_go_to_smallest_index(self):
        nb = knn_neighbors(np.eye(4), 1)
        assert nb.indices[:, 0].tolist() == [1, 0, 0, 0]

    def test_argmax(self):
        A = np.array([[1, 0.2, 0.9, 0.1], [0.2, 1, 0.3, 0.3], [0.9, 0.3, 1, 0.5], [0.1, 0.3, 0.5, 1]])
        assert knn_neighbors(A, 1)[0].tolist() == [2]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(2)
        A = random_affinity(rng, 8)
        nb = knn_neighbors(A, 3)
        for i in range(8):
            ranked = sorted((j for j in range(8) if j != i), key=lambda j: (-A[i, j], j))
            assert nb[i].tolist() == ranked[:3]

    def test_clamps_large_k(self):
        with pytest.warns(UserWarning):
            nb = knn_neighbors(np.ones((3, 3)), 5)
        assert nb.k == 2
        for i in range(3):
            assert i not in nb[i] and len(set(nb[i])) == 2

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        A = np.round(random_affinity(rng, 10), 1)  # plenty of ties
        assert np.array_equal(knn_neighbors(A, 4).indices, knn_neighbors(A.copy(), 4).indices)

    def test_rejects_zero_k(self):
        with pytest.raises(ValueError):
            knn_neighbors(np.ones((3, 3)), 0)


class TestHik:
    def test_identical_normalized(self):
        x = np.array([0.1, 0.4, 0.5])
        assert hik_similarity(x, x) == pytest.approx(1.0)

    def test_disjoint(self):
        assert hik_similarity([1, 0, 2], [0, 3, 0]) == 0.0

    def test_hand_value(self):
        assert hik_similarity([0.2, 0.8], [0.5, 0.5]) == pytest.approx(0.7)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 8).flatmap(lambda d: st.tuples(
        arrays(float, d, elements=st.floats(0, 5)), arrays(float, d, elements=st.floats(0, 5)))))
    def test_bounded_and_symmetric(self, xy):
        x, y = xy
        h = hik_similarity(x, y)
        assert h == hik_similarity(y, x)
        assert h <= min(x.sum(), y.sum()) + 1e-12


def test_check_affinity():
    check_affinity(np.array([[0, 1], [1, 0.0]]))
    with pytest.raises(ValueError):
        check_affinity(np.array([[0, 1], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        check_affinity(sp.csr_matrix(np.array([[0, -1], [-1, 0.0]])))
