"""Small dense linear-algebra kernels.

Thin SVD (general one-sided Jacobi path plus a closed-form two-row path used
on the guidance hot path), a cyclic Jacobi symmetric eigensolver, cosine
similarity and the square root of a 2x2 PSD matrix.  Everything works in
float64 and is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedSimilarityError

_EPS = np.finfo(np.float64).eps
MAX_SWEEPS = 50
JACOBI_OFFDIAG_TOL = 1e-14


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``A = left_vectors @ diag(singular_values) @ right_vectors``.

    ``right_vectors`` holds the v_i as rows (k x d); ``left_vectors`` holds the
    w_i as columns (n x k).  Singular values are sorted in descending order.
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors


def as_matrix(a, name: str = "A") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def svd_thin(a, *, fast: bool = True) -> SvdResult:
    """Thin SVD with ``k = min(n, d)`` factors.

    Args:
        a: n x d matrix.  If ``n > d`` the transpose is decomposed internally.
        fast: use the closed-form path when ``n == 2``.  Passing ``False``
            forces the general Jacobi path (used to cross-check the fast one).

    Each right vector is sign-normalized so that its first entry that is not
    negligible (above ``1e-12`` of the row's largest magnitude) is positive.
    Tied singular values keep the original row order.
    """
    A = as_matrix(a)
    n, d = A.shape
    if n > d:
        r = svd_thin(A.T, fast=fast)
        return _canonical_signs(r.singular_values, r.right_vectors.T.copy(), r.left_vectors.T.copy())
    if n == 2 and fast:
        sigma, W, V = _svd_two_rows(A)
    else:
        sigma, W, V = _svd_jacobi(A)
    return _canonical_signs(sigma, W, V)


def _svd_two_rows(A: np.ndarray):
    r1, r2 = A[0], A[1]
    a = float(r1 @ r1)
    b = float(r2 @ r2)
    c = float(r1 @ r2)
    # Rotation that diagonalises the 2x2 Gram matrix [[a, c], [c, b]].
    if c == 0.0:
        cs, sn = (1.0, 0.0) if a >= b else (0.0, 1.0)
    else:
        theta = 0.5 * math.atan2(2.0 * c, a - b)
        cs, sn = math.cos(theta), math.sin(theta)
    R = np.stack((cs * r1 + sn * r2, cs * r2 - sn * r1))
    Q = np.array([[cs, -sn], [sn, cs]])
    if c != 0.0:
        # Rounding leaves the smaller row slightly off-orthogonal; when that row is
        # pure noise (rank one input) its direction would otherwise be arbitrary.
        big = int(R[1] @ R[1] > R[0] @ R[0])
        top = np.linalg.norm(R[big])
        p = R[big] / top
        for _ in range(2):
            R[1 - big] -= (R[1 - big] @ p) * p
        if np.linalg.norm(R[1 - big]) <= 4.0 * _EPS * top:
            R[1 - big] = 0.0
    return _finish_rows(R, Q)


def _svd_jacobi(A: np.ndarray):
    """One-sided (Hestenes) Jacobi: rotate row pairs until mutually orthogonal.

    Each rotation is the Jacobi rotation of the implicit Gram matrix ``A A^T``;
    applying it to the rows instead of the Gram matrix keeps small singular
    values accurate.
    """
    R = A.copy()
    n, d = R.shape
    Q = np.eye(n)
    tol = max(d, n) * _EPS
    for _ in range(MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ri, rj = R[i], R[j]
                a = float(ri @ ri)
                b = float(rj @ rj)
                c = float(ri @ rj)
                if c == 0.0 or abs(c) <= tol * math.sqrt(a * b):
                    continue
                rotated = True
                theta = 0.5 * math.atan2(2.0 * c, a - b)
                cs, sn = math.cos(theta), math.sin(theta)
                R[i], R[j] = cs * ri + sn * rj, cs * rj - sn * ri
                qi, qj = Q[:, i].copy(), Q[:, j].copy()
                Q[:, i] = cs * qi + sn * qj
                Q[:, j] = cs * qj - sn * qi
        if not rotated:
            break
    return _finish_rows(R, Q)


def _finish_rows(R: np.ndarray, Q: np.ndarray):
    """Turn orthogonal rows ``R`` (with ``A = Q R``) into sorted SVD factors."""
    sigma = np.sqrt(np.einsum("ij,ij->i", R, R))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    R = R[order]
    W = Q[:, order]
    V = np.zeros_like(R)
    done = sigma > 0.0
    V[done] = R[done] / sigma[done, None]
    for i in np.flatnonzero(~done):
        V[i] = _complement_vector(V[done], V.shape[1])
        done[i] = True
    return sigma, W, V


def _complement_vector(B: np.ndarray, d: int) -> np.ndarray:
    """Unit vector orthogonal to every (orthonormal) row of ``B``."""
    if len(B) == 0:
        e = np.zeros(d)
        e[0] = 1.0
        return e
    # Standard basis vector with the largest residual, orthogonalised twice.
    residual = 1.0 - np.einsum("ij,ij->j", B, B)
    v = np.zeros(d)
    v[int(np.argmax(residual))] = 1.0
    for _ in range(2):
        v = v - B.T @ (B @ v)
    return v / np.linalg.norm(v)


def _canonical_signs(sigma, W, V) -> SvdResult:
    V = V.copy()
    W = W.copy()
    for i, row in enumerate(V):
        scale = np.max(np.abs(row)) if row.size else 0.0
        if scale == 0.0:
            continue
        idx = np.flatnonzero(np.abs(row) > 1e-12 * scale)[0]
        if row[idx] < 0:
            V[i] = -row
            W[:, i] = -W[:, i]
    return SvdResult(singular_values=np.asarray(sigma, dtype=np.float64), left_vectors=W, right_vectors=V)


def jacobi_eigh(G, *, tol: float = JACOBI_OFFDIAG_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix by cyclic two-sided Jacobi.

    Sweeps stop once the off-diagonal Frobenius norm drops to
    ``tol * ||G||_F`` or after ``max_sweeps``.

    Returns:
        (eigenvalues, eigenvectors) with eigenvalues in descending order and
        eigenvectors as columns.
    """
    S = as_matrix(G, "G").copy()
    m = S.shape[0]
    if S.shape != (m, m):
        raise InvalidInputError(f"G must be square, got {S.shape}")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max(initial=0.0))):
        raise InvalidInputError("G must be symmetric")
    S = 0.5 * (S + S.T)
    V = np.eye(m)
    norm = np.linalg.norm(S)
    offdiag = ~np.eye(m, dtype=bool)
    for _ in range(max_sweeps):
        if np.linalg.norm(S[offdiag]) <= tol * norm:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                spq = float(S[p, q])
                if spq == 0.0:
                    continue
                h = float(S[q, q] - S[p, p])
                # Smaller root of t^2 + 2 t h / (2 spq) - 1 = 0, written to avoid overflow.
                t = 2.0 * spq / (h + math.copysign(math.hypot(h, 2.0 * spq), h))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # S <- J^T S J with J the (p, q) rotation.
                Sp, Sq = S[:, p].copy(), S[:, q].copy()
                S[:, p] = c * Sp - s * Sq
                S[:, q] = s * Sp + c * Sq
                Sp, Sq = S[p, :].copy(), S[q, :].copy()
                S[p, :] = c * Sp - s * Sq
                S[q, :] = s * Sp + c * Sq
                S[p, q] = S[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    evals = np.diag(S).copy()
    order = np.argsort(-evals, kind="stable")
    return evals[order], V[:, order]


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise InvalidInputError(f"length mismatch: {u.size} vs {v.size}")
    mu, mv = np.abs(u).max(initial=0.0), np.abs(v).max(initial=0.0)
    if mu == 0.0 or mv == 0.0:
        raise UndefinedSimilarityError("cosine similarity of a zero vector is undefined")
    # rescale first so that squaring cannot underflow or overflow
    u, v = u / mu, v / mv
    return float(np.clip((u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)), -1.0, 1.0))


def spd_sqrt_2x2(M) -> np.ndarray:
    """Principal square root of a symmetric PSD 2x2 matrix.

    Uses the Cayley-Hamilton identity ``sqrt(M) = (M + s I) / sqrt(tr M + 2 s)``
    with ``s = sqrt(det M)``.  Eigenvalues down to ``-1e-12`` (relative to the
    matrix scale) are treated as zero.
    """
    M = as_matrix(M, "M")
    if M.shape != (2, 2):
        raise InvalidInputError(f"expected a 2x2 matrix, got {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if abs(M[0, 1] - M[1, 0]) > 1e-12 * scale:
        raise InvalidInputError("matrix is not symmetric")
    a, d = M[0, 0], M[1, 1]
    b = 0.5 * (M[0, 1] + M[1, 0])
    half_tr = 0.5 * (a + d)
    disc = math.hypot(0.5 * (a - d), b)
    lam_min = half_tr - disc
    if lam_min < -1e-12 * scale:
        raise InvalidInputError(f"matrix is indefinite (eigenvalue {lam_min:.3e})")
    s = math.sqrt(max(a * d - b * b, 0.0))
    t = math.sqrt(max(a + d + 2.0 * s, 0.0))
    if t == 0.0:
        return np.zeros((2, 2))
    return np.array([[a + s, b], [b, d + s]]) / t
