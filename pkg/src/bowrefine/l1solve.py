"""Equality-constrained minimum-L1 solver (basis pursuit).

Solves ``min ||z||_1  s.t.  M z = b`` by writing ``z = u - v`` with
``u, v >= 0`` and running a Mehrotra predictor-corrector primal-dual
interior-point method on the resulting linear program

    min 1'x   s.t.  [M, -M] x = b,  x >= 0.

The Newton systems reduce to ``m x m`` normal equations
``M diag(d_u + d_v) M' dy = r`` so each iteration costs one small Cholesky
factorisation. After the interior-point phase the iterate is polished onto
the vertex its support suggests; if that fails the constraint residual is
removed by a minimum-norm correction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RankDeficient

_STEP_SHRINK = 0.995


@dataclass(frozen=True)
class SolverConfig:
    duality_gap_tol: float = 1e-6
    max_iterations: int = 200
    constraint_feasibility_tol: float = 1e-8

    def __post_init__(self):
        if not (self.duality_gap_tol > 0 and self.constraint_feasibility_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class L1Solution:
    z: np.ndarray
    objective: float
    residual_norm: float
    converged: bool
    iterations: int = 0


def _solution(M, b, z, converged, iterations):
    return L1Solution(
        z=z,
        objective=float(np.abs(z).sum()),
        residual_norm=float(np.linalg.norm(M @ z - b)),
        converged=converged,
        iterations=iterations,
    )


def row_rank(M: np.ndarray) -> int:
    """Numerical rank from singular values, with the LAPACK-style cutoff."""
    if M.size == 0:
        return 0
    sv = scipy.linalg.svdvals(M)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > max(M.shape) * np.finfo(float).eps * sv[0]))


def _solve_pd(K, rhs):
    try:
        c = scipy.linalg.cho_factor(K, check_finite=False)
        return scipy.linalg.cho_solve(c, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(K, rhs, rcond=None)[0]


def _max_step(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-x[neg] / dx[neg])))


def _interior_point(M, b, cfg: SolverConfig):
    """Run the primal-dual method on the split LP with ``||b|| = 1``.

    Returns ``(z, converged, iterations)`` where ``z`` is the best iterate
    seen, measured by the largest of the scaled residuals and gap.
    """
    m, p = M.shape
    n = 2 * p

    def A(x):
        return M @ (x[:p] - x[p:])

    def At(y):
        t = M.T @ y
        return np.concatenate([t, -t])

    # Mehrotra's starting point; A c = 0 here so y0 = 0 and s0 = c
    w = _solve_pd(2.0 * (M @ M.T), b)
    x = At(w)
    y = np.zeros(m)
    s = np.ones(n)
    x += max(-1.5 * x.min(), 0.0)
    xs = x @ s
    x += 0.5 * xs / s.sum()
    s += 0.5 * xs / max(x.sum(), 1e-300)
    if not np.all(x > 0):
        x = np.ones(n)

    feas_tol = cfg.constraint_feasibility_tol
    best = (np.inf, x[:p] - x[p:])
    for it in range(1, cfg.max_iterations + 1):
        rp = b - A(x)
        rd = 1.0 - At(y) - s
        gap = x @ s
        pobj = x.sum()
        rp_rel = np.linalg.norm(rp) / 2.0  # 1 + ||b||
        rd_rel = np.linalg.norm(rd) / (1.0 + np.sqrt(n))
        gap_rel = gap / (1.0 + abs(pobj))
        merit = max(rp_rel / feas_tol, rd_rel / feas_tol, gap_rel / cfg.duality_gap_tol)
        if merit < best[0]:
            best = (merit, x[:p] - x[p:])
        if merit <= 1.0:
            return x[:p] - x[p:], True, it
        mu = gap / n

        d = x / s
        K = (M * (d[:p] + d[p:])) @ M.T
        try:
            chol = scipy.linalg.cho_factor(K, check_finite=False)
            solve = lambda r: scipy.linalg.cho_solve(chol, r, check_finite=False)  # noqa: E731
        except np.linalg.LinAlgError:
            K = K + 1e-14 * np.trace(K) * np.eye(m)
            solve = lambda r: np.linalg.lstsq(K, r, rcond=None)[0]  # noqa: E731

        def newton(rc):
            dy = solve(rp + A(d * rd) - A(rc / s))
            ds = rd - At(dy)
            dx = (rc - x * ds) / s
            return dx, dy, ds

        # predictor
        dx_a, dy_a, ds_a = newton(-x * s)
        ap = _max_step(x, dx_a)
        ad = _max_step(s, ds_a)
        mu_aff = (x + ap * dx_a) @ (s + ad * ds_a) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, dy, ds = newton(sigma * mu - x * s - dx_a * ds_a)
        ap = min(1.0, _STEP_SHRINK * _max_step(x, dx))
        ad = min(1.0, _STEP_SHRINK * _max_step(s, ds))
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))):
            break
        x = np.maximum(x, 1e-300)
        s = np.maximum(s, 1e-300)
    return best[1], False, cfg.max_iterations


def _restore_feasibility(M, b, z):
    r = b - M @ z
    return z + M.T @ _solve_pd(M @ M.T, r)


def _polish(M, b, z, cfg: SolverConfig):
    """Snap ``z`` to the basic solution on its numerical support, if that is no worse."""
    m = M.shape[0]
    scale = np.max(np.abs(z)) if z.size else 0.0
    if scale == 0:
        return None
    order = np.argsort(-np.abs(z), kind="stable")
    n_big = int(np.sum(np.abs(z) > 1e-6 * scale))
    bnorm = np.linalg.norm(b)
    l1 = np.abs(z).sum()
    best = None
    # a vertex has at most m nonzeros; try the thresholded support, then the m largest
    for size in sorted({min(n_big, m), m}):
        support = order[:size]
        zs, *_ = np.linalg.lstsq(M[:, support], b, rcond=None)
        cand = np.zeros_like(z)
        cand[support] = zs
        if np.linalg.norm(M @ cand - b) > cfg.constraint_feasibility_tol * (1.0 + bnorm):
            continue
        obj = np.abs(cand).sum()
        if obj > l1 + cfg.duality_gap_tol * (1.0 + l1):
            continue
        if best is None or obj < np.abs(best).sum():
            best = cand
    return best


def basis_pursuit(M, b, cfg: SolverConfig | None = None) -> L1Solution:
    """Minimise ``||z||_1`` subject to ``M z = b``.

    Parameters
    ----------
    M : (m, p) array with full row rank, ``m <= p``
    b : (m,) array
    cfg : SolverConfig, optional

    Returns
    -------
    L1Solution
        ``converged`` is False when the iteration cap was hit; ``z`` is then
        the best iterate after feasibility restoration.

    Raises
    ------
    RankDeficient
        If ``M`` has numerical row rank below ``m``.
    """
    cfg = cfg or SolverConfig()
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, p = M.shape
    if m < 1 or b.shape[0] != m:
        raise ValueError(f"incompatible shapes M {M.shape}, b {b.shape}")
    rank = row_rank(M)
    if rank < m:
        raise RankDeficient(f"constraint matrix has rank {rank} < {m} rows")

    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return _solution(M, b, np.zeros(p), True, 0)

    # the split LP is solved for unit-norm b, which makes the result scale-equivariant
    bs = b / bnorm
    z, converged, iterations = _interior_point(M, bs, cfg)
    polished = _polish(M, bs, z, cfg)
    z = polished if polished is not None else _restore_feasibility(M, bs, z)
    return _solution(M, b, z * bnorm, converged, iterations)
