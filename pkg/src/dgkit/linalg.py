"""Dense symmetric linear algebra for distance geometry.

Squared EDMs, centered Gram matrices, a Jacobi eigensolver, numerical rank,
classical-MDS style factorization and feasibility residuals for the
EDM-completion SDP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL, DgpInstance, Realization
from .errors import (ConvergenceError, DimensionMismatch, IntervalEdgePresent,
                     InvariantError, NotPsd, RankExceedsK)

JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
RANK_TOL_FACTOR = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order; eigenvectors stored as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # circle method: m-1 rounds of m/2 disjoint pairs covering every pair once
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        top, bot = players[:half], players[half:][::-1]
        rounds.append((np.array(top), np.array(bot)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _as_symmetric(B: np.ndarray) -> np.ndarray:
    A = np.array(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvariantError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A - A.T).max(initial=0.0) > 1e-10 * scale:
        raise InvariantError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def eigen_sym(B: np.ndarray, tol: float = JACOBI_REL_TOL,
              max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the n/2 rotations of a round touch disjoint rows and can be applied
    together. Iteration stops once the off-diagonal Frobenius norm falls
    below ``tol`` times the Frobenius norm of ``B``.
    """
    A = _as_symmetric(B)
    n = A.shape[0]
    V = np.eye(n)
    norm = float(np.linalg.norm(A))
    sweeps = 0
    if n > 1 and norm > 0.0:
        m = n + (n % 2)
        rounds = []
        for top, bot in _round_robin(m):
            keep = (top < n) & (bot < n)
            rounds.append((np.minimum(top, bot)[keep], np.maximum(top, bot)[keep]))
        target = tol * norm
        while True:
            off = float(np.linalg.norm(A - np.diag(np.diag(A))))
            if off < target:
                break
            if sweeps >= max_sweeps:
                raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
            sweeps += 1
            for P, Q in rounds:
                apq = A[P, Q]
                active = apq != 0.0
                if not active.any():
                    continue
                P, Q, apq = P[active], Q[active], apq[active]
                theta = (A[Q, Q] - A[P, P]) / (2.0 * apq)
                big = np.abs(theta) > 1e150
                th = np.where(big, 1.0, theta)
                t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                             np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0)))
                t[theta == 0.0] = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = A[P, :].copy(), A[Q, :].copy()
                A[P, :] = c[:, None] * rp - s[:, None] * rq
                A[Q, :] = s[:, None] * rp + c[:, None] * rq
                cp, cq = A[:, P].copy(), A[:, Q].copy()
                A[:, P] = cp * c - cq * s
                A[:, Q] = cp * s + cq * c
                A[P, Q] = 0.0
                A[Q, P] = 0.0
                vp, vq = V[:, P].copy(), V[:, Q].copy()
                V[:, P] = vp * c - vq * s
                V[:, Q] = vp * s + vq * c
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    # sign convention: first non-negligible entry of each eigenvector positive
    for j in range(n):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return EigenDecomposition(w, V, sweeps)


def sqedm_from_realization(x: Realization | np.ndarray) -> np.ndarray:
    c = x.coords if isinstance(x, Realization) else np.asarray(x, dtype=float)
    diff = c[:, None, :] - c[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def check_sqedm(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvariantError("squared EDM must be square")
    scale = max(1.0, float(np.abs(D).max(initial=0.0)))
    if np.abs(D - D.T).max(initial=0.0) > 1e-10 * scale:
        raise InvariantError("squared EDM must be symmetric")
    if np.abs(np.diag(D)).max(initial=0.0) > 0.0:
        raise InvariantError("squared EDM must have a zero diagonal")
    if D.min(initial=0.0) < 0.0:
        raise InvariantError("squared EDM entries must be nonnegative")
    return D


def centering_matrix(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def gram_from_sqedm(D: np.ndarray) -> np.ndarray:
    """Centered Gram matrix ``B = -J D J / 2``."""
    D = check_sqedm(D)
    J = centering_matrix(D.shape[0])
    B = -0.5 * (J @ D @ J)
    return 0.5 * (B + B.T)


def is_psd(B: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return bool(eigen_sym(B).eigenvalues.min(initial=0.0) >= -tol)


def realize_from_gram(B: np.ndarray, K: int, tol: float = DEFAULT_TOL) -> Realization:
    """Factor ``B = x x^T`` with ``x`` of width ``K``.

    Coordinates follow the eigenvalues in descending order; columns past the
    numerical rank are zero.
    """
    eig = eigen_sym(B)
    w, V = eig.eigenvalues, eig.eigenvectors
    if w.size and w.min() < -tol:
        raise NotPsd(f"smallest eigenvalue {w.min():.3e} < -{tol:g}")
    rank = int(np.sum(w > tol))
    if rank > K:
        raise RankExceedsK(f"Gram matrix has {rank} eigenvalues above {tol:g}, more than K={K}")
    n = V.shape[0]
    x = np.zeros((n, K))
    x[:, :rank] = V[:, :rank] * np.sqrt(w[:rank])
    return Realization(x)


def singular_values(M: np.ndarray) -> np.ndarray:
    """Singular values of ``M`` in descending order.

    They are read off the symmetric matrix ``[[0, M], [M^T, 0]]`` whose
    spectrum is ``±sigma_i`` padded with zeros, which keeps small singular
    values at absolute accuracy instead of squaring them as ``M^T M`` would.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    r, c = M.shape
    k = min(r, c)
    if k == 0:
        return np.zeros(0)
    H = np.zeros((r + c, r + c))
    H[:r, r:] = M
    H[r:, :r] = M.T
    w = eigen_sym(H).eigenvalues
    return np.clip(w[:k], 0.0, None)


def numerical_rank(M: np.ndarray, tol_factor: float = RANK_TOL_FACTOR) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol_factor * s[0] * max(M.shape)))


def barvinok_bound(m: int) -> int:
    if m < 1:
        raise ValueError("m must be positive")
    return (math.isqrt(8 * m + 1) - 1) // 2


def edmcp_residual(B: np.ndarray, instance: DgpInstance) -> float:
    """Largest violation of ``B_ii + B_jj - 2 B_ij = d_ij^2`` over the edges."""
    B = np.asarray(B, dtype=float)
    if B.shape != (instance.n, instance.n):
        raise DimensionMismatch(f"Gram matrix is {B.shape}, instance has n={instance.n}")
    if instance.has_intervals:
        raise IntervalEdgePresent("EDM completion residual needs exact distances")
    worst = 0.0
    for e in instance.edges:
        r = abs(B[e.u, e.u] + B[e.v, e.v] - 2.0 * B[e.u, e.v] - e.d * e.d)
        worst = max(worst, r)
    return worst
