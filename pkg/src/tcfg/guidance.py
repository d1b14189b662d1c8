"""Guidance rules: conditional-only, CFG, and tangential-damping CFG (TCFG).

TCFG stacks the unconditional and conditional predictions into a 2 x d
matrix, takes its top right singular vector ``v1`` and replaces the
unconditional prediction by its projection ``(u . v1) v1`` before the usual
CFG extrapolation.  The projection is invariant to the sign of ``v1`` and to
the order of the two rows, and it commutes with positive rescaling, so it
gives the same guided direction in noise space and in score space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import spectral_gap_index
from .errors import InvalidInputError
from .linalg import svd_thin

DEFAULT_TIE_TOLERANCE = 1e-9


class GuidanceMode(str, enum.Enum):
    COND = "cond"
    CFG = "cfg"
    TCFG = "tcfg"
    POOLED_TCFG = "tcfg-pooled"


@dataclass(frozen=True)
class GuidanceConfig:
    mode: GuidanceMode = GuidanceMode.TCFG
    scale: float = 2.0
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE

    def __post_init__(self):
        object.__setattr__(self, "mode", GuidanceMode(self.mode))
        if not np.isfinite(self.scale):
            raise InvalidInputError("guidance scale must be finite")
        if not self.tie_tolerance >= 0:
            raise InvalidInputError("tie_tolerance must be >= 0")


@dataclass(frozen=True)
class ScorePair:
    """Unconditional and conditional prediction for one sample (same space, same t)."""

    uncond: np.ndarray
    cond: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.uncond, dtype=np.float64)
        c = np.asarray(self.cond, dtype=np.float64)
        if u.ndim != 1 or u.shape != c.shape:
            raise InvalidInputError(f"score pair must be two equal-length vectors, got {u.shape} and {c.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(c))):
            raise InvalidInputError("score pair contains non-finite values")
        object.__setattr__(self, "uncond", u)
        object.__setattr__(self, "cond", c)


def _extrapolate(base, cond, w: float):
    # (1 - w) * base + w * cond == base + w * (cond - base), but exact at w in {0, 1}.
    return (1.0 - w) * base + w * cond


def cfg_combine(pair: ScorePair, w: float) -> np.ndarray:
    return _extrapolate(pair.uncond, pair.cond, w)


def tcfg_project(pair: ScorePair, tie_tolerance: float = DEFAULT_TIE_TOLERANCE) -> np.ndarray:
    """Project the unconditional prediction onto the dominant right singular vector.

    Returns ``uncond`` unchanged when the stacked matrix is zero or its top
    singular value is tied with the second (``s1 - s2 <= tie_tolerance * s1``).
    """
    u = pair.uncond
    svd = svd_thin(np.stack([u, pair.cond]))
    s = svd.singular_values
    s1 = s[0]
    s2 = s[1] if s.size > 1 else 0.0
    if s1 == 0.0 or s1 - s2 <= tie_tolerance * s1:
        return u.copy()
    if s2 == 0.0:
        # rank one: u already lies on the line spanned by v1
        return u.copy()
    v1 = svd.right_vectors[0]
    return (u @ v1) * v1


def tcfg_combine(pair: ScorePair, w: float, tie_tolerance: float = DEFAULT_TIE_TOLERANCE) -> np.ndarray:
    return _extrapolate(tcfg_project(pair, tie_tolerance), pair.cond, w)


def tcfg_project_batch(U, C, tie_tolerance: float = DEFAULT_TIE_TOLERANCE) -> np.ndarray:
    """Row-wise :func:`tcfg_project` for (N, d) arrays, vectorised.

    Uses the same closed-form 2 x 2 Gram rotation as the two-row SVD path.
    """
    U = np.asarray(U, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if U.shape != C.shape or U.ndim != 2:
        raise InvalidInputError(f"expected two equal (N, d) arrays, got {U.shape} and {C.shape}")
    a = np.einsum("ij,ij->i", U, U)
    b = np.einsum("ij,ij->i", C, C)
    k = np.einsum("ij,ij->i", U, C)
    theta = 0.5 * np.arctan2(2.0 * k, a - b)
    cs, sn = np.cos(theta), np.sin(theta)
    diag = k == 0.0
    cs = np.where(diag, np.where(a >= b, 1.0, 0.0), cs)
    sn = np.where(diag, np.where(a >= b, 0.0, 1.0), sn)
    p1 = cs[:, None] * U + sn[:, None] * C
    p2 = cs[:, None] * C - sn[:, None] * U
    s1 = np.sqrt(np.einsum("ij,ij->i", p1, p1))
    s2 = np.sqrt(np.einsum("ij,ij->i", p2, p2))
    swap = s2 > s1
    top = np.where(swap[:, None], p2, p1)
    low = np.where(swap[:, None], p1, p2)
    s_hi = np.maximum(s1, s2)
    s_lo = np.minimum(s1, s2)
    safe = np.where(s_hi == 0.0, 1.0, s_hi)
    v1 = top / safe[:, None]
    for _ in range(2):
        low = low - np.einsum("ij,ij->i", low, v1)[:, None] * v1
    rank_one = ~diag & (np.sqrt(np.einsum("ij,ij->i", low, low)) <= 4.0 * np.finfo(np.float64).eps * s_hi)
    keep = (s_hi == 0.0) | (s_hi - s_lo <= tie_tolerance * s_hi) | rank_one
    proj = np.einsum("ij,ij->i", U, v1)[:, None] * v1
    return np.where(keep[:, None], U, proj)


def pooled_tcfg_project(pairs, tie_tolerance: float = DEFAULT_TIE_TOLERANCE) -> np.ndarray:
    """Project every unconditional prediction onto a subspace shared by all samples.

    All 2N predictions are stacked into one matrix; the retained rank is the
    spectral-gap index of its singular values.  Without a gap the inputs are
    returned unchanged.  ``pairs`` is a sequence of :class:`ScorePair` or a
    tuple ``(U, C)`` of (N, d) arrays; the result is an (N, d) array.
    """
    U, C = _as_arrays(pairs)
    svd = svd_thin(np.concatenate([U, C]))
    s = svd.singular_values
    if s.size < 2:
        return U.copy()
    r = spectral_gap_index(s)
    if r is None:
        return U.copy()
    if r == 1 and s[0] - s[1] <= tie_tolerance * s[0]:
        return U.copy()
    Vr = svd.right_vectors[:r]
    return (U @ Vr.T) @ Vr


def _as_arrays(pairs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pairs, tuple) and len(pairs) == 2 and not isinstance(pairs[0], ScorePair):
        U = np.atleast_2d(np.asarray(pairs[0], dtype=np.float64))
        C = np.atleast_2d(np.asarray(pairs[1], dtype=np.float64))
    else:
        pairs = list(pairs)
        if not pairs:
            raise InvalidInputError("pooled projection needs at least one pair")
        U = np.stack([p.uncond for p in pairs])
        C = np.stack([p.cond for p in pairs])
    if U.shape != C.shape or U.shape[0] == 0:
        raise InvalidInputError("pooled projection needs at least one pair of equal dimensions")
    return U, C


def guide_batch(U, C, config: GuidanceConfig) -> np.ndarray:
    """Apply ``config`` to (N, d) unconditional / conditional predictions."""
    U = np.asarray(U, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    w = config.scale
    mode = config.mode
    if mode is GuidanceMode.COND:
        return C.copy()
    if mode is GuidanceMode.CFG:
        return _extrapolate(U, C, w)
    if mode is GuidanceMode.TCFG:
        return _extrapolate(tcfg_project_batch(U, C, config.tie_tolerance), C, w)
    if mode is GuidanceMode.POOLED_TCFG:
        return _extrapolate(pooled_tcfg_project((U, C), config.tie_tolerance), C, w)
    raise InvalidInputError(f"unknown guidance mode {mode!r}")
