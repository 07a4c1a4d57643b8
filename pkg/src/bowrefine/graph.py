"""Image-image graph construction: kNN, L1 sparse representation, structured L1.

The two L1 constructions reconstruct each image from its ``k`` textual
nearest neighbours in kernel form: with ``y_i`` the affinities of image
``i`` to its neighbours and ``C_i`` the affinities among the neighbours,

    min ||[a; z]||_1   s.t.   y_i = C_i a + z                      (SR)

and, adding an L1 Laplacian penalty built from the visual histograms of the
neighbours (``Ct_i' Ct_i = L_i``),

    min ||[a; z; x]||_1   s.t.   y_i = C_i a + z,   0 = Ct_i a + x  (SSR)

Edge weights are ``|a_j|`` for the neighbour in position ``j``, and the
final matrix is symmetrised as ``(W + W') / 2``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .core import Laplacian, Matrix, NeighborList, as_array, knn_neighbors, normalized_laplacian
from .l1solve import L1Solution, SolverConfig, basis_pursuit

logger = logging.getLogger(__name__)

EIG_CLAMP = 1e-10
GRAPH_KINDS = ("knn", "sr", "ssr")


@dataclass(frozen=True)
class EigenFactor:
    """Eigen-decomposition ``L = V diag(sigma) V'`` with ascending, clamped ``sigma``."""

    V: np.ndarray
    sigma: np.ndarray

    @property
    def c_tilde(self) -> np.ndarray:
        """``diag(sqrt(sigma)) V'``, so that ``c_tilde' c_tilde = L``."""
        return np.sqrt(self.sigma)[:, None] * self.V.T


@dataclass(frozen=True)
class LocalProblem:
    image_index: int
    neighbors: np.ndarray
    y: np.ndarray
    C: np.ndarray
    C_tilde: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    zeta: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    converged: bool = True

    def system(self):
        """Constraint matrix and right-hand side of the local basis-pursuit problem.

        Rows of ``C_tilde`` that are identically zero impose ``xi_j = 0`` and
        are dropped; with ``C_tilde`` absent or all zero this is the plain SR
        system ``[C, I]``.
        """
        k = self.y.shape[0]
        top = np.hstack([self.C, np.eye(k)])
        Ct = self._active_regularizer()
        if Ct is None:
            return top, self.y
        r = Ct.shape[0]
        M = np.block([[top, np.zeros((k, r))], [Ct, np.zeros((r, k)), np.eye(r)]])
        return M, np.concatenate([self.y, np.zeros(r)])

    def _active_regularizer(self):
        if self.C_tilde is None:
            return None
        Ct = self.C_tilde[np.any(self.C_tilde != 0, axis=1)]
        return Ct if Ct.shape[0] else None


def build_knn_graph(A: Matrix, k: int) -> sp.csr_matrix:
    """Keep each image's ``k`` strongest textual affinities, then symmetrise."""
    A = as_array(A)
    nbrs = knn_neighbors(A, k)
    n = A.shape[0]
    rows = np.repeat(np.arange(n), nbrs.k)
    cols = nbrs.indices.ravel()
    return _symmetrize(rows, cols, A[rows, cols], n)


def _symmetrize(rows, cols, vals, n) -> sp.csr_matrix:
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W = (W + W.T) / 2
    W.setdiag(0)
    W.eliminate_zeros()
    W.sort_indices()
    return sp.csr_matrix(W)


def local_problem(A: np.ndarray, neighbors: np.ndarray, i: int) -> LocalProblem:
    idx = np.asarray(neighbors)
    return LocalProblem(
        image_index=i,
        neighbors=idx,
        y=A[idx, i].copy(),
        C=A[np.ix_(idx, idx)].copy(),
    )


def solve_local_problem(problem: LocalProblem, cfg: SolverConfig) -> LocalProblem:
    M, b = problem.system()
    sol: L1Solution = basis_pursuit(M, b, cfg)
    k = problem.y.shape[0]
    if not sol.converged:
        logger.warning(
            "basis pursuit did not converge for image %d (residual %.3g); using best iterate",
            problem.image_index,
            sol.residual_norm,
        )
    xi = None
    Ct = problem._active_regularizer()
    if Ct is not None:
        xi = np.zeros(problem.C_tilde.shape[0])
        xi[np.any(problem.C_tilde != 0, axis=1)] = sol.z[2 * k:]
    return replace(problem, alpha=sol.z[:k], zeta=sol.z[k:2 * k], xi=xi, converged=sol.converged)


def neighborhood_laplacian(Y, neighbors, normalize_rows: bool = False) -> Laplacian:
    """Normalized Laplacian of the linear-kernel graph over the selected rows of ``Y``.

    The Gram matrix keeps its diagonal, so a single nonzero row gives ``L = [0]``.
    """
    Yi = as_array(Y)[np.asarray(neighbors)]
    if len(Yi) == 0:
        raise ValueError("neighbourhood is empty")
    if normalize_rows:
        norms = np.linalg.norm(Yi, axis=1)
        Yi = Yi * np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)[:, None]
    G = Yi @ Yi.T
    return normalized_laplacian((G + G.T) / 2)


def laplacian_sqrt_factor(L) -> EigenFactor:
    """Square-root factor of a PSD Laplacian via its eigen-decomposition.

    Eigenvalues within ``EIG_CLAMP`` below zero are treated as round-off
    and set to 0.
    """
    Lm = as_array(L.matrix if isinstance(L, Laplacian) else L)
    sigma, V = scipy.linalg.eigh((Lm + Lm.T) / 2)
    if sigma.size and sigma[0] < -1e-8 * max(1.0, abs(sigma[-1])):
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {sigma[0]:.3g})")
    sigma = np.where(sigma < EIG_CLAMP, 0.0, sigma)
    return EigenFactor(V=V, sigma=sigma)


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def _l1_graph(problems, cfg, n, n_jobs):
    solved = _map(lambda p: solve_local_problem(p, cfg), problems, n_jobs)
    rows = np.concatenate([np.full(p.neighbors.shape[0], p.image_index) for p in solved])
    cols = np.concatenate([p.neighbors for p in solved])
    vals = np.concatenate([np.abs(p.alpha) for p in solved])
    return _symmetrize(rows, cols, vals, n)


def local_problems(A: Matrix, k: int, Y=None, normalize_rows: bool = False):
    """Per-image kernel-form reconstruction problems (with the Laplacian block when ``Y`` is given)."""
    A = as_array(A)
    nbrs: NeighborList = knn_neighbors(A, k)
    problems = []
    for i in range(A.shape[0]):
        p = local_problem(A, nbrs[i], i)
        if Y is not None:
            Li = neighborhood_laplacian(Y, nbrs[i], normalize_rows=normalize_rows)
            p = replace(p, C_tilde=laplacian_sqrt_factor(Li).c_tilde)
        problems.append(p)
    return problems


def sparse_repr_graph(A: Matrix, k: int, cfg: SolverConfig | None = None, n_jobs: int = 1) -> sp.csr_matrix:
    """L1 graph from sparse reconstruction of each image by its textual neighbours."""
    cfg = cfg or SolverConfig()
    n = A.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    return _l1_graph(local_problems(A, k), cfg, n, n_jobs)


def structured_sparse_graph(
    A: Matrix,
    Y,
    k: int,
    cfg: SolverConfig | None = None,
    normalize_rows: bool = False,
    n_jobs: int = 1,
) -> sp.csr_matrix:
    """L1 graph from sparse reconstruction with an L1 visual-Laplacian penalty."""
    cfg = cfg or SolverConfig()
    n = A.shape[0]
    if as_array(Y).shape[0] != n:
        raise ValueError(f"Y has {as_array(Y).shape[0]} rows but A describes {n} images")
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    return _l1_graph(local_problems(A, k, Y, normalize_rows), cfg, n, n_jobs)


def build_graph(kind: str, A: Matrix, k: int, Y=None, cfg: SolverConfig | None = None, **kwargs) -> sp.csr_matrix:
    if kind == "knn":
        return build_knn_graph(A, k)
    if kind == "sr":
        return sparse_repr_graph(A, k, cfg, n_jobs=kwargs.get("n_jobs", 1))
    if kind == "ssr":
        if Y is None:
            raise ValueError("the ssr graph needs the visual model Y")
        return structured_sparse_graph(A, Y, k, cfg, **kwargs)
    raise ValueError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
