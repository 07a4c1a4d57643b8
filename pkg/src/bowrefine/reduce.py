"""Vocabulary reduction by spectral clustering of visual words.

A feature-feature graph is built from the refined model, either from
clipped Pearson correlations between columns (``ssc1``) or as
``F' A F`` with the textual image affinity ``A`` (``ssc2``). Words are
embedded with the smallest nontrivial eigenvectors of the graph's
normalized Laplacian, clustered with k-means, and the columns of each
cluster are summed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import BowMatrix, Matrix, as_array, normalized_laplacian
from .errors import DimensionMismatch, InsufficientSpectrum

TRIVIAL_EIGENVALUE = 1e-10
KMEANS_MAX_ITER = 300
VARIANTS = ("ssc1", "ssc2")


@dataclass(frozen=True)
class ReductionGraph:
    W: np.ndarray
    variant: str


@dataclass(frozen=True)
class ColumnStats:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class EmbeddingMatrix:
    E: np.ndarray
    eigenvalues: np.ndarray
    rows_normalized: bool = True
    n_trivial: int = 0


@dataclass(frozen=True)
class MembershipMatrix:
    """Binary ``K x M`` partition matrix; ``labels[j]`` is the cluster of word ``j``."""

    labels: np.ndarray
    n_clusters: int

    @property
    def U(self) -> np.ndarray:
        U = np.zeros((self.n_clusters, self.labels.shape[0]))
        U[self.labels, np.arange(self.labels.shape[0])] = 1.0
        return U

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)


def column_stats(F) -> ColumnStats:
    F = as_array(F)
    return ColumnStats(mu=F.mean(axis=0), sigma=F.std(axis=0, ddof=1))


def ppm_weights(F_star) -> ReductionGraph:
    """Pearson correlations between visual words with negatives clipped to 0."""
    F = as_array(F_star)
    n = F.shape[0]
    if n < 2:
        raise ValueError("correlation needs at least two images")
    stats = column_stats(F)
    Z = F - stats.mu
    inv = np.divide(1.0, stats.sigma, out=np.zeros_like(stats.sigma), where=stats.sigma > 0)
    Z = Z * inv
    W = (Z.T @ Z) / (n - 1)
    W = np.clip((W + W.T) / 2, 0.0, 1.0)
    np.fill_diagonal(W, 0.0)
    return ReductionGraph(W=W, variant="ssc1")


def semantic_weights(F_star, A: Matrix) -> ReductionGraph:
    """``F' A F`` with a zeroed diagonal."""
    F = as_array(F_star)
    if A.shape != (F.shape[0], F.shape[0]):
        raise DimensionMismatch(f"affinity of shape {A.shape} does not match {F.shape[0]} images")
    AF = A @ F
    W = F.T @ np.asarray(AF)
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0.0)
    return ReductionGraph(W=W, variant="ssc2")


def reduction_graph(variant: str, F_star, A: Matrix | None = None) -> ReductionGraph:
    if variant == "ssc1":
        return ppm_weights(F_star)
    if variant == "ssc2":
        if A is None:
            raise ValueError("ssc2 needs the textual affinity matrix")
        return semantic_weights(F_star, A)
    raise ValueError(f"unknown reduction variant {variant!r}; expected one of {VARIANTS}")


def spectral_embed(G: ReductionGraph | np.ndarray, K: int, normalize_rows: bool = True) -> EmbeddingMatrix:
    """Embed words with the ``K`` smallest nontrivial Laplacian eigenvectors.

    Eigenpairs with eigenvalue below ``TRIVIAL_EIGENVALUE`` (one per
    connected component) are skipped.
    """
    W = G.W if isinstance(G, ReductionGraph) else np.asarray(G, dtype=float)
    M = W.shape[0]
    if not 1 <= K < M:
        raise ValueError(f"need 1 <= K < {M}, got K={K}")
    L = as_array(normalized_laplacian(W).matrix)
    vals, vecs = scipy.linalg.eigh(L)
    n_trivial = int(np.sum(vals < TRIVIAL_EIGENVALUE))
    available = M - n_trivial
    if available < K:
        raise InsufficientSpectrum(
            f"only {available} nontrivial eigenpairs for K={K}; try K <= {available}",
            available=available,
        )
    E = vecs[:, n_trivial:n_trivial + K]
    if normalize_rows:
        norms = np.linalg.norm(E, axis=1)
        E = E * np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)[:, None]
    return EmbeddingMatrix(E=E, eigenvalues=vals[n_trivial:n_trivial + K].copy(),
                           rows_normalized=normalize_rows, n_trivial=n_trivial)


def _sq_dists(X, C):
    d = (X * X).sum(axis=1)[:, None] - 2.0 * X @ C.T + (C * C).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plusplus(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1])[:, 0]
    for c in range(1, K):
        total = closest.sum()
        if total <= 0:
            raise ValueError(f"fewer than K={K} distinct rows to seed k-means")
        j = rng.choice(n, p=closest / total)
        centers[c] = X[j]
        closest = np.minimum(closest, _sq_dists(X, centers[c:c + 1])[:, 0])
    return centers


def _assign(X, centers):
    # argmin returns the first minimum, i.e. ties go to the smaller cluster index
    return np.argmin(_sq_dists(X, centers), axis=1)


def _repair_empty(X, labels, centers):
    """Give each empty cluster the point farthest from its current centroid."""
    K = centers.shape[0]
    for c in range(K):
        sizes = np.bincount(labels, minlength=K)
        if sizes[c] > 0:
            continue
        dist = ((X - centers[labels]) ** 2).sum(axis=1)
        # only steal from clusters that can spare a point
        dist[sizes[labels] <= 1] = -1.0
        j = int(np.argmax(dist))
        labels[j] = c
        centers[c] = X[j]
    return labels


def kmeans_cluster(E: EmbeddingMatrix | np.ndarray, K: int, seed: int = 0,
                   max_iter: int = KMEANS_MAX_ITER) -> MembershipMatrix:
    """Seeded k-means++ followed by Lloyd iterations to an assignment fixpoint."""
    X = E.E if isinstance(E, EmbeddingMatrix) else np.asarray(E, dtype=float)
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= {n}, got K={K}")
    if len(np.unique(X, axis=0)) < K:
        raise ValueError(f"fewer than K={K} distinct rows to cluster")
    rng = np.random.default_rng(seed)
    centers = kmeans_plusplus(X, K, rng)
    labels = _repair_empty(X, _assign(X, centers), centers)
    for _ in range(max_iter):
        for c in range(K):
            centers[c] = X[labels == c].mean(axis=0)
        new = _repair_empty(X, _assign(X, centers), centers)
        if np.array_equal(new, labels):
            break
        labels = new
    return MembershipMatrix(labels=labels.astype(np.intp), n_clusters=K)


def _conserve_mass(F, Ystar):
    """Absorb each row's rounding residue into one entry.

    Afterwards the correctly rounded row sums of ``Ystar`` and ``F`` agree
    bit for bit. The adjusted entry is recomputed as ``target - rest`` and
    so moves by about one ulp of the row total. Entries are tried largest
    first; a smaller entry has a finer ulp, which resolves rounding ties.
    """
    for i in range(F.shape[0]):
        target = math.fsum(F[i])
        row = Ystar[i]
        if math.fsum(row) == target:
            continue
        for j in np.argsort(-row, kind="stable"):
            if row[j] <= 0:
                break
            old = row[j]
            row[j] = 0.0
            row[j] = max(math.fsum(np.concatenate([[target], -row])), 0.0)
            for _ in range(4):
                total = math.fsum(row)
                if total == target:
                    break
                row[j] = np.nextafter(row[j], np.inf if total < target else -np.inf)
            if math.fsum(row) == target:
                break
            row[j] = old
    return Ystar


def reduce_bow(F_star, U: MembershipMatrix | np.ndarray):
    """Sum the columns of each cluster: ``Y* = F* U'``.

    When ``U`` is a partition, row mass is conserved exactly under correctly
    rounded summation.
    """
    F = as_array(F_star)
    Um = U.U if isinstance(U, MembershipMatrix) else np.asarray(U, dtype=float)
    if Um.shape[1] != F.shape[1]:
        raise DimensionMismatch(f"U has {Um.shape[1]} columns but F* has {F.shape[1]}")
    Ystar = F @ Um.T
    if np.all(Um.sum(axis=0) == 1) and np.all((Um == 0) | (Um == 1)):
        Ystar = _conserve_mass(F, Ystar)
    if isinstance(F_star, BowMatrix):
        return BowMatrix(Ystar, [f"h{c}" for c in range(Um.shape[0])])
    return Ystar


def semantic_spectral_clustering(F_star, K: int, variant: str = "ssc2", A: Matrix | None = None,
                                 seed: int = 0):
    """Full reduction: graph, embedding, clustering. Returns ``(U, embedding)``.

    With ``K`` equal to the vocabulary size the only partition without empty
    clusters is the singleton one, so it is returned directly with an empty
    embedding.
    """
    G = reduction_graph(variant, F_star, A)
    M = G.W.shape[0]
    if K == M:
        empty = EmbeddingMatrix(E=np.zeros((M, 0)), eigenvalues=np.zeros(0), rows_normalized=False)
        return MembershipMatrix(np.arange(M), M), empty
    emb = spectral_embed(G, K)
    return kmeans_cluster(emb, K, seed), emb
