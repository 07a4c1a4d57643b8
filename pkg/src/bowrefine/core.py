"""Matrix containers, kernels, graph Laplacians and neighbour search.

Everything here is a pure function of its inputs. Affinity and weight
matrices are plain ``numpy`` arrays when dense and ``scipy.sparse`` CSR
matrices when sparse; both are accepted wherever a graph is expected.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

Matrix = Union[np.ndarray, sp.spmatrix, sp.sparray]

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BowMatrix:
    """Nonnegative images x features histogram matrix.

    Used for the visual model, the textual model, the refined model and the
    reduced model alike. ``feature_ids`` label the columns; when omitted they
    default to ``f0, f1, ...``.
    """

    values: np.ndarray
    feature_ids: Optional[Sequence[str]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
            raise ValueError(f"BowMatrix needs a nonempty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("BowMatrix contains non-finite entries")
        if np.any(values < 0):
            raise ValueError("BowMatrix entries must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        ids = self.feature_ids
        if ids is None:
            ids = [f"f{j}" for j in range(values.shape[1])]
        ids = tuple(str(s) for s in ids)
        if len(ids) != values.shape[1]:
            raise ValueError(f"{len(ids)} feature ids for {values.shape[1]} columns")
        object.__setattr__(self, "feature_ids", ids)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_images(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Laplacian:
    matrix: Matrix
    degrees: np.ndarray


@dataclass(frozen=True)
class NeighborList:
    k: int
    indices: np.ndarray = field(repr=False)

    def __getitem__(self, i):
        return self.indices[i]

    def __len__(self):
        return self.indices.shape[0]


def as_array(X) -> np.ndarray:
    """Dense float view of a BowMatrix, array or sparse matrix."""
    if isinstance(X, BowMatrix):
        return X.values
    if sp.issparse(X):
        return X.toarray()
    return np.asarray(X, dtype=float)


def check_affinity(W: Matrix, tol: float = SYMMETRY_TOL) -> None:
    """Raise ``ValueError`` unless ``W`` is square, symmetric and nonnegative."""
    if W.shape[0] != W.shape[1]:
        raise ValueError(f"affinity matrix must be square, got {W.shape}")
    if sp.issparse(W):
        W = sp.csr_matrix(W)
        if W.nnz and W.data.min() < 0:
            raise ValueError("affinity matrix has negative entries")
        asym = abs(W - W.T)
        asym = asym.max() if asym.nnz else 0.0
    else:
        W = np.asarray(W, dtype=float)
        if np.any(W < 0):
            raise ValueError("affinity matrix has negative entries")
        asym = np.max(np.abs(W - W.T)) if W.size else 0.0
    if asym > tol:
        raise ValueError(f"affinity matrix is not symmetric (max asymmetry {asym:.3g})")


def linear_kernel(X, row_normalize: bool = True) -> np.ndarray:
    """Gram matrix of the rows of ``X``.

    With ``row_normalize`` the rows are scaled to unit Euclidean norm first,
    which bounds every entry to [0, 1] for nonnegative input. Zero rows stay
    zero.
    """
    X = as_array(X)
    if row_normalize:
        norms = np.linalg.norm(X, axis=1)
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        X = X * scale[:, None]
    K = X @ X.T
    # exact symmetry regardless of BLAS blocking
    return (K + K.T) / 2


def inv_sqrt_degrees(W: Matrix):
    """Row sums of ``W`` and their inverse square roots (0 where the degree is 0)."""
    degrees = np.asarray(W.sum(axis=1), dtype=float).ravel()
    inv = np.zeros_like(degrees)
    pos = degrees > 0
    inv[pos] = 1.0 / np.sqrt(degrees[pos])
    return degrees, inv


def normalized_adjacency(W: Matrix) -> Matrix:
    """``D^-1/2 W D^-1/2`` with isolated vertices mapped to zero rows."""
    _, inv = inv_sqrt_degrees(W)
    if sp.issparse(W):
        Dm = sp.diags(inv)
        return sp.csr_matrix(Dm @ W @ Dm)
    W = np.asarray(W, dtype=float)
    return inv[:, None] * W * inv[None, :]


def normalized_laplacian(W: Matrix) -> Laplacian:
    """Symmetric normalized Laplacian ``I - D^-1/2 W D^-1/2``.

    A vertex of zero degree gets a zero entry in ``D^-1/2``, so its row of
    the Laplacian is the corresponding unit vector. Sparse input yields a
    sparse CSR Laplacian.
    """
    degrees, _ = inv_sqrt_degrees(W)
    S = normalized_adjacency(W)
    n = W.shape[0]
    if sp.issparse(S):
        L = sp.csr_matrix(sp.identity(n, format="csr") - S)
    else:
        L = np.eye(n) - S
        L = (L + L.T) / 2
    return Laplacian(matrix=L, degrees=degrees)


def knn_neighbors(A: Matrix, k: int) -> NeighborList:
    """Indices of the ``k`` most similar other images for every image.

    Each list is ordered by descending affinity; ties go to the smaller
    index. ``k >= n`` is clamped to ``n - 1`` with a warning.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    A = as_array(A)
    n = A.shape[0]
    if k > n - 1:
        warnings.warn(f"k={k} exceeds n-1={n - 1}; clamping", stacklevel=2)
        k = n - 1
    indices = np.empty((n, k), dtype=np.intp)
    for i in range(n):
        row = -A[i].copy()
        row[i] = np.inf
        # stable sort keeps ascending index order among equal affinities
        indices[i] = np.argsort(row, kind="stable")[:k]
    return NeighborList(k=k, indices=indices)


def hik_similarity(x, y) -> float:
    """Histogram intersection ``sum_d min(x_d, y_d)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"histograms differ in length: {x.shape} vs {y.shape}")
    return float(np.minimum(x, y).sum())
