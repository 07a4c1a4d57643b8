"""Graph diffusion of the visual BOW model over an image graph.

Each visual word is propagated as an independent class score:

    F* = argmin_F  1/2 ||F - Y||_F^2 + lam/2 tr(F' L F) = (I + lam L)^-1 Y

which equals ``(1 - a) (I - a S)^-1 Y`` with ``a = lam / (1 + lam)`` and
``S = D^-1/2 W D^-1/2``; the iterative route reaches it through
``F <- a S F + (1 - a) Y``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .core import BowMatrix, Matrix, as_array, normalized_adjacency, normalized_laplacian
from .errors import ConfigError, DimensionMismatch, NotConvergedWarning

MAX_DENSE_N = 5000
MODES = ("iterative", "closed_form")


@dataclass(frozen=True)
class RefineConfig:
    """Diffusion strength and stopping rule.

    Give either ``alpha`` (in (0, 1)) or ``lam`` (>= 0); the other is derived
    from ``alpha = lam / (1 + lam)``. With neither, ``alpha`` is 0.995.
    """

    alpha: Optional[float] = None
    lam: Optional[float] = None
    tol: float = 1e-6
    max_iterations: int = 1000
    mode: str = "iterative"

    def __post_init__(self):
        if self.alpha is not None and self.lam is not None:
            raise ConfigError("give alpha or lam, not both")
        if self.lam is not None:
            if not (np.isfinite(self.lam) and self.lam >= 0):
                raise ConfigError(f"lam must be >= 0, got {self.lam}")
            object.__setattr__(self, "alpha", self.lam / (1.0 + self.lam))
        else:
            alpha = 0.995 if self.alpha is None else self.alpha
            if not 0.0 < alpha < 1.0:
                raise ConfigError(f"alpha must lie in the open interval (0, 1), got {alpha}")
            object.__setattr__(self, "alpha", float(alpha))
            object.__setattr__(self, "lam", alpha / (1.0 - alpha))
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class RefineInfo:
    iterations: int
    converged: bool
    relative_change: float


def _like(Y, values):
    if isinstance(Y, BowMatrix):
        return BowMatrix(values, Y.feature_ids)
    return values


def _check(Y, W):
    Yv = as_array(Y)
    if W.shape[0] != W.shape[1] or W.shape[0] != Yv.shape[0]:
        raise DimensionMismatch(f"graph of shape {W.shape} does not match {Yv.shape[0]} images")
    return Yv


def compute_s(W: Matrix) -> Matrix:
    """``D^-1/2 W D^-1/2``; isolated vertices give zero rows."""
    return normalized_adjacency(W)


def refine_closed_form(Y, W: Matrix, cfg: RefineConfig | None = None, max_n: int = MAX_DENSE_N):
    """Dense solve of ``(I + lam L) F = Y`` for all visual words at once."""
    cfg = cfg or RefineConfig()
    Yv = _check(Y, W)
    n = Yv.shape[0]
    if n > max_n:
        raise ValueError(f"closed form limited to n <= {max_n} (got {n}); use the iterative mode")
    L = as_array(normalized_laplacian(W).matrix)
    F = scipy.linalg.solve(np.eye(n) + cfg.lam * L, Yv, assume_a="pos")
    # the inverse is entrywise nonnegative, so negative entries are round-off
    F = np.maximum(F, 0.0) if np.all(Yv >= 0) else F
    return _like(Y, F)


def refine_iterative(Y, W: Matrix, cfg: RefineConfig | None = None, return_info: bool = False):
    """Iterate ``F <- a S F + (1 - a) Y`` from ``F = Y``.

    Stops when ``||F(t+1) - F(t)||_F / ||F(t+1)||_F < tol``. Hitting
    ``max_iterations`` emits :class:`NotConvergedWarning` and returns the
    last iterate.
    """
    cfg = cfg or RefineConfig()
    Yv = _check(Y, W)
    a = cfg.alpha
    perm = None
    if sp.issparse(W):
        S = compute_s(sp.csr_matrix(W))
        # bandwidth-reducing order keeps the rows touched by S @ F close in memory
        perm = reverse_cuthill_mckee(S, symmetric_mode=True)
        S = S[perm][:, perm]
        S.sort_indices()
        Yv = Yv[perm]
    else:
        S = compute_s(np.asarray(W, dtype=float))
    aS = a * S
    base = (1.0 - a) * Yv
    F = Yv.copy()
    change = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        F_next = aS @ F
        F_next += base
        # the old iterate is no longer needed, so its buffer holds the difference
        num = np.linalg.norm(np.subtract(F_next, F, out=F))
        den = np.linalg.norm(F_next)
        change = num / den if den > 0 else 0.0
        F = F_next
        if change < cfg.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"diffusion stopped after {it} iterations with relative change {change:.3g}",
            NotConvergedWarning,
            stacklevel=2,
        )
    F = np.asarray(F)
    if perm is not None:
        F = F[np.argsort(perm)]
    out = _like(Y, F)
    if return_info:
        return out, RefineInfo(iterations=it, converged=converged, relative_change=float(change))
    return out


def refine(Y, W: Matrix, cfg: RefineConfig | None = None):
    cfg = cfg or RefineConfig()
    if cfg.mode == "closed_form":
        return refine_closed_form(Y, W, cfg)
    return refine_iterative(Y, W, cfg)
