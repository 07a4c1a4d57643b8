import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bowrefine.core import BowMatrix, normalized_laplacian
from bowrefine.errors import ConfigError, DimensionMismatch, NotConvergedWarning
from bowrefine.graph import build_knn_graph
from bowrefine.refine import RefineConfig, compute_s, refine, refine_closed_form, refine_iterative

TIGHT = dict(tol=1e-13, max_iterations=200_000)


def random_graph(rng, n, density=0.3):
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0)
    return W


class TestConfig:
    def test_alpha_lambda_relation(self):
        c = RefineConfig(alpha=0.9)
        assert c.lam == pytest.approx(9.0)
        c = RefineConfig(lam=3.0)
        assert c.alpha == pytest.approx(0.75, abs=1e-12)
        assert RefineConfig().alpha == 0.995

    @pytest.mark.parametrize("kwargs", [{"alpha": 0.0}, {"alpha": 1.0}, {"lam": -1.0},
                                        {"alpha": 0.5, "lam": 1.0}, {"tol": 0}, {"mode": "fast"}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            RefineConfig(**kwargs)


class TestComputeS:
    def test_unit_degrees(self):
        W = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(compute_s(W), W)

    def test_empty(self):
        assert np.array_equal(compute_s(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_spectrum_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            S = compute_s(sp.csr_matrix(random_graph(rng, 15, 0.2)))
            ev = np.linalg.eigvalsh(S.toarray())
            assert ev.min() >= -1 - 1e-12 and ev.max() <= 1 + 1e-12


class TestClosedForm:
    def test_lambda_zero(self):
        rng = np.random.default_rng(1)
        Y = rng.random((6, 4))
        assert np.allclose(refine_closed_form(Y, random_graph(rng, 6), RefineConfig(lam=0.0)), Y)

    def test_empty_graph_shrinks(self):
        Y = np.arange(12, dtype=float).reshape(4, 3)
        F = refine_closed_form(Y, np.zeros((4, 4)), RefineConfig(lam=3.0))
        assert np.allclose(F, Y / 4.0)

    def test_dense_inverse_oracle(self):
        rng = np.random.default_rng(2)
        Y = rng.random((20, 8))
        W = random_graph(rng, 20)
        cfg = RefineConfig(alpha=0.9)
        L = np.asarray(normalized_laplacian(W).matrix)
        expected = np.linalg.inv(np.eye(20) + cfg.lam * L) @ Y
        assert np.allclose(refine_closed_form(Y, W, cfg), expected, atol=1e-10, rtol=0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            refine_closed_form(np.ones((3, 2)), np.zeros((4, 4)))

    def test_size_guard(self):
        with pytest.raises(ValueError):
            refine_closed_form(np.ones((6, 2)), np.zeros((6, 6)), max_n=5)

    def test_preserves_feature_ids(self):
        Y = BowMatrix(np.ones((3, 2)), ["a", "b"])
        F = refine_closed_form(Y, np.ones((3, 3)) - np.eye(3))
        assert isinstance(F, BowMatrix) and F.feature_ids == ("a", "b")


class TestIterative:
    def test_small_alpha_single_step(self):
        rng = np.random.default_rng(3)
        Y = rng.random((5, 3))
        F = refine_iterative(Y, random_graph(rng, 5), RefineConfig(alpha=1e-12))
        assert np.allclose(F, Y, atol=1e-10)

    def test_empty_graph(self):
        Y = np.arange(6, dtype=float).reshape(3, 2)
        F = refine_iterative(Y, sp.csr_matrix((3, 3)), RefineConfig(alpha=0.8))
        assert np.allclose(F, 0.2 * Y)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(4)
        Y = rng.random((50, 30))
        W = sp.csr_matrix(random_graph(rng, 50, 0.2))
        cfg = RefineConfig(alpha=0.95, **TIGHT)
        Fi = refine_iterative(Y, W, cfg)
        Fc = refine_closed_form(Y, W, RefineConfig(lam=cfg.alpha / (1 - cfg.alpha)))
        assert np.linalg.norm(Fi - Fc) / np.linalg.norm(Fc) <= 1e-6

    def test_resolvent_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            W = random_graph(rng, 12, 0.5)
            a = rng.uniform(0.1, 0.99)
            lam = a / (1 - a)
            L = np.asarray(normalized_laplacian(W).matrix)
            S = compute_s(W)
            lhs = np.linalg.inv(np.eye(12) + lam * L)
            rhs = (1 - a) * np.linalg.inv(np.eye(12) - a * S)
            assert np.allclose(lhs, rhs, atol=1e-10)

    def test_not_converged_warns_and_flags(self):
        rng = np.random.default_rng(6)
        Y = rng.random((10, 3))
        W = random_graph(rng, 10, 0.5)
        with pytest.warns(NotConvergedWarning):
            F, info = refine_iterative(Y, W, RefineConfig(alpha=0.99, max_iterations=3), return_info=True)
        assert not info.converged and info.iterations == 3
        assert F.shape == Y.shape

    def test_residual_contracts_by_alpha(self):
        rng = np.random.default_rng(7)
        Y = rng.random((30, 5))
        a = 0.9
        S = compute_s(sp.csr_matrix(random_graph(rng, 30, 0.2)))
        F_prev, F = Y, a * (S @ Y) + (1 - a) * Y
        for _ in range(50):
            F_next = a * (S @ F) + (1 - a) * Y
            assert np.linalg.norm(F_next - F) <= a * np.linalg.norm(F - F_prev) + 1e-12
            F_prev, F = F, F_next

    def test_dispatch(self):
        rng = np.random.default_rng(8)
        Y = rng.random((8, 2))
        W = random_graph(rng, 8, 0.6)
        a = refine(Y, W, RefineConfig(alpha=0.5, mode="closed_form"))
        b = refine(Y, W, RefineConfig(alpha=0.5, tol=1e-14, max_iterations=10_000))
        assert np.allclose(a, b, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), c=st.floats(0.01, 100), alpha=st.floats(0.05, 0.99))
def test_nonnegative_and_scale_equivariant(seed, c, alpha):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 15))
    Y = rng.random((n, 4)) * (rng.random((n, 4)) < 0.6)
    W = sp.csr_matrix(random_graph(rng, n, 0.4))
    cfg = RefineConfig(alpha=alpha, tol=1e-10, max_iterations=5000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        F = refine_iterative(Y, W, cfg)
        Fc = refine_iterative(c * Y, W, cfg)
    assert np.all(F >= 0)
    assert np.all(refine_closed_form(Y, W, cfg) >= 0)
    assert np.allclose(Fc, c * F, rtol=1e-9, atol=1e-12 * c)


def test_knn_graph_pipeline_smoke():
    rng = np.random.default_rng(9)
    T = rng.random((40, 10))
    Y = rng.random((40, 12))
    A = T @ T.T
    W = build_knn_graph(A, 5)
    F = refine_iterative(Y, W, RefineConfig(alpha=0.9, tol=1e-10))
    assert F.shape == Y.shape and np.all(F >= 0)
