"""Score-geometry diagnostics: singular spectra, spectral gaps, singular-vector
alignment and the tangent/normal split of a score on the two-moons manifold."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import project_to_moons
from .errors import InvalidInputError

NO_GAP_RATIO = 1.5


@dataclass
class SpectrumReport:
    """Singular values per timestep for the unconditional and conditional score matrices."""

    timesteps: list[int]
    uncond: list[np.ndarray]
    cond: list[np.ndarray]
    n_samples: int
    dim: int
    uncond_gap: list[int | None] = field(default_factory=list)
    cond_gap: list[int | None] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "spectrum",
            "n_samples": self.n_samples,
            "dim": self.dim,
            "timesteps": list(self.timesteps),
            "uncond": [s.tolist() for s in self.uncond],
            "cond": [s.tolist() for s in self.cond],
            "uncond_gap": list(self.uncond_gap),
            "cond_gap": list(self.cond_gap),
        }

    def rows(self):
        for t, su, sc in zip(self.timesteps, self.uncond, self.cond):
            for i, v in enumerate(su, 1):
                yield t, "uncond", i, float(v)
            for i, v in enumerate(sc, 1):
                yield t, "cond", i, float(v)


@dataclass
class AlignmentReport:
    """|cos| between index-matched (and optionally greedily matched) singular vectors."""

    timesteps: list[int]
    indexed: list[np.ndarray]
    greedy: list[np.ndarray] | None = None
    gap_index: list[int | None] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "alignment",
            "timesteps": list(self.timesteps),
            "indexed": [a.tolist() for a in self.indexed],
            "greedy": None if self.greedy is None else [a.tolist() for a in self.greedy],
            "gap_index": list(self.gap_index),
        }

    def rows(self):
        for k, t in enumerate(self.timesteps):
            for i, v in enumerate(self.indexed[k], 1):
                yield t, "indexed", i, float(v)
            if self.greedy is not None:
                for i, v in enumerate(self.greedy[k], 1):
                    yield t, "greedy", i, float(v)


def write_report(report, json_path, csv_path) -> None:
    Path(json_path).write_text(json.dumps(report.to_json(), indent=1) + "\n")
    with Path(csv_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestep", "series", "index", "value"])
        for t, series, i, v in report.rows():
            w.writerow([t, series, i, repr(v)])


def score_matrices(trajectories: Sequence, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack the recorded unconditional / conditional scores at step ``t`` (N x d each)."""
    if not trajectories:
        raise InvalidInputError("no trajectories given")
    rows_u, rows_c = [], []
    for traj in trajectories:
        if traj.uncond_scores is None or traj.cond_scores is None:
            raise InvalidInputError("trajectory was not recorded with scores")
        k = traj.step_index(t)
        rows_u.append(traj.uncond_scores[k])
        rows_c.append(traj.cond_scores[k])
    return np.stack(rows_u), np.stack(rows_c)


def gap_ratios(spectrum) -> np.ndarray:
    """``s_i / s_{i+1}`` (NaN where ``s_{i+1} == 0``)."""
    s = np.asarray(spectrum, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s[1:] > 0, s[:-1] / np.where(s[1:] > 0, s[1:], 1.0), np.nan)


def spectral_gap_index(spectrum, no_gap_ratio: float = NO_GAP_RATIO) -> int | None:
    """Number of leading directions before the largest consecutive-ratio drop.

    Returns None ("no gap") when every ratio is at most ``no_gap_ratio`` or no
    ratio is defined.
    """
    s = np.asarray(spectrum, dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise InvalidInputError("spectrum needs at least two values")
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise InvalidInputError("spectrum must be non-negative and sorted in descending order")
    ratios = gap_ratios(s)
    if np.all(np.isnan(ratios)):
        return None
    i = int(np.nanargmax(ratios))
    if ratios[i] <= no_gap_ratio:
        return None
    return i + 1


def alignment_curves(V_uncond, V_cond, mode: str = "indexed") -> np.ndarray:
    """Absolute cosines between two sets of unit right singular vectors (rows).

    ``indexed`` pairs row i with row i.  ``greedy`` walks the conditional
    vectors in order and matches each to the unused unconditional vector with
    the largest |cos|.
    """
    Vu = np.asarray(V_uncond, dtype=np.float64)
    Vc = np.asarray(V_cond, dtype=np.float64)
    if Vu.shape != Vc.shape or Vu.ndim != 2:
        raise InvalidInputError(f"shape mismatch: {Vu.shape} vs {Vc.shape}")
    if mode == "indexed":
        return np.clip(np.abs(np.einsum("ij,ij->i", Vu, Vc)), 0.0, 1.0)
    if mode == "greedy":
        values, _ = greedy_matching(Vu, Vc)
        return values
    raise InvalidInputError(f"unknown alignment mode {mode!r}")


def greedy_matching(Vu: np.ndarray, Vc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cos = np.abs(Vc @ Vu.T)
    used = np.zeros(Vu.shape[0], dtype=bool)
    values = np.empty(Vc.shape[0])
    match = np.empty(Vc.shape[0], dtype=np.int64)
    for i in range(Vc.shape[0]):
        row = np.where(used, -1.0, cos[i])
        j = int(np.argmax(row))
        used[j] = True
        match[i] = j
        values[i] = min(cos[i, j], 1.0)
    return values, match


def normal_tangent_ratio(score, point) -> float:
    """``|T_p s| / |N_p s|`` at the nearest moon point; ``inf`` if the normal part is 0."""
    score = np.asarray(score, dtype=np.float64)
    proj = project_to_moons(point).nearest
    tan = abs(float(score @ proj.tangent))
    nor = abs(float(score @ proj.normal))
    if nor == 0.0:
        return math.inf
    return tan / nor
