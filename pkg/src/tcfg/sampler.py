"""Ancestral DDPM sampling with pluggable noise predictors and guidance."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .dataset import NULL_LABEL, LabeledPoints
from .errors import InvalidInputError, InvalidStepError
from .guidance import GuidanceConfig, GuidanceMode, guide_batch
from .model import ScoreModel
from .schedule import NoiseSchedule, eps_to_score

_CHUNK_ELEMENTS = 4_000_000


class ScoreSource(Protocol):
    """Anything that predicts the noise for a batch of latents."""

    def eps(self, z: np.ndarray, t: int, label: int) -> np.ndarray: ...


def analytic_eps(data: LabeledPoints, z, t: int, label: int, sched: NoiseSchedule) -> np.ndarray:
    """Exact noise prediction for the empirical distribution of ``data``.

    The posterior over data points given ``z`` is a softmax of Gaussian
    log-likelihoods; the posterior mean then gives
    ``eps* = (z - sqrt(ab) E[x0|z]) / sqrt(1 - ab)``.  Label 2 uses all points.
    """
    if label not in (0, 1, NULL_LABEL):
        raise InvalidInputError(f"label must be 0, 1 or {NULL_LABEL}")
    X = data.positions if label == NULL_LABEL else data.with_label(label)
    if X.shape[0] == 0:
        raise InvalidInputError(f"no data points with label {label}")
    t = sched.check_step(t)
    ab = sched.alpha_bar(t)
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != X.shape[1]:
        raise InvalidInputError(f"z has dimension {Z.shape[1]}, data has {X.shape[1]}")
    sa = np.sqrt(ab)
    var = 1.0 - ab
    Xs = sa * X
    xs_sq = np.einsum("ij,ij->i", Xs, Xs)
    out = np.empty_like(Z)
    chunk = max(1, _CHUNK_ELEMENTS // X.shape[0])
    for lo in range(0, Z.shape[0], chunk):
        Zc = Z[lo : lo + chunk]
        d2 = np.einsum("ij,ij->i", Zc, Zc)[:, None] - 2.0 * Zc @ Xs.T + xs_sq[None, :]
        logits = -np.maximum(d2, 0.0) / (2.0 * var)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        out[lo : lo + chunk] = (Zc - sa * (w @ X)) / np.sqrt(var)
    return out[0] if single else out


@dataclass
class AnalyticSource:
    data: LabeledPoints
    sched: NoiseSchedule
    kind: str = "analytic"

    def eps(self, z, t, label):
        return analytic_eps(self.data, z, t, label, self.sched)


@dataclass
class ModelSource:
    model: ScoreModel
    kind: str = "model"

    def eps(self, z, t, label):
        return self.model.forward(z, t, label)


def ddpm_step(
    z_t,
    eps_hat,
    t: int,
    sched: NoiseSchedule,
    rng: np.random.Generator | None = None,
    noise_on: bool = True,
    noise=None,
) -> np.ndarray:
    """One ancestral step ``z_t -> z_{t-1}`` with posterior std ``sqrt(beta_t)``.

    No noise is added at ``t == 1`` or when ``noise_on`` is false.  Otherwise
    ``noise`` (standard normal, same shape as ``z_t``) is used if given, else it
    is drawn from ``rng``.
    """
    t = sched.check_step(t)
    z_t = np.asarray(z_t, dtype=np.float64)
    beta = sched.beta(t)
    mean = (z_t - (beta / np.sqrt(1.0 - sched.alpha_bar(t))) * eps_hat) / np.sqrt(sched.alpha(t))
    if t == 1 or not noise_on:
        return mean
    if noise is None:
        if rng is None:
            raise InvalidInputError("ddpm_step needs rng or noise when noise is on")
        noise = rng.standard_normal(z_t.shape)
    return mean + np.sqrt(beta) * noise


@dataclass
class Trajectory:
    """States ``z_T .. z_0`` and the scores used at each step ``t = T .. 1``."""

    states: np.ndarray
    uncond_scores: np.ndarray | None
    cond_scores: np.ndarray | None
    guided_scores: np.ndarray | None
    label: int
    seed: int
    index: int = 0

    @property
    def T(self) -> int:
        return self.states.shape[0] - 1

    def step_index(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise InvalidStepError(f"step {t} outside [1, {self.T}]")
        return self.T - t

    def state_at(self, t: int) -> np.ndarray:
        """Latent ``z_t`` (``t = 0`` is the final sample)."""
        if not 0 <= t <= self.T:
            raise InvalidStepError(f"step {t} outside [0, {self.T}]")
        return self.states[self.T - t]

    def to_json(self) -> dict:
        def arr(a):
            return None if a is None else a.tolist()

        return {
            "index": self.index,
            "label": self.label,
            "seed": self.seed,
            "states": arr(self.states),
            "uncond_scores": arr(self.uncond_scores),
            "cond_scores": arr(self.cond_scores),
            "guided_scores": arr(self.guided_scores),
        }


@dataclass
class SampleResult:
    samples: np.ndarray
    label: int
    mode: GuidanceMode
    seed: int
    trajectories: list[Trajectory] | None = None


def sample_noise(seed: int, index: int, T: int, dim: int) -> np.ndarray:
    """Per-sample noise table: row 0 is ``z_T``, row ``T - t + 1`` is the step-``t`` noise."""
    return np.random.default_rng([seed, index]).standard_normal((T + 1, dim))


def sample(
    source: ScoreSource,
    guidance: GuidanceConfig,
    label: int,
    n: int,
    sched: NoiseSchedule,
    seed: int,
    record: bool = False,
    noise_on: bool = True,
    dim: int = 2,
    chunk_size: int | None = None,
) -> SampleResult:
    """Draw ``n`` guided samples for ``label``.

    Sample ``i`` owns the noise stream seeded by ``(seed, i)``, so results do
    not depend on ``chunk_size``, except in pooled-TCFG mode where the shared
    SVD couples every sample in a chunk.
    """
    if label not in (0, 1):
        raise InvalidInputError("sampling label must be 0 or 1")
    if n < 1:
        raise InvalidInputError("n must be positive")
    chunk_size = chunk_size or n
    parts = [
        _sample_chunk(source, guidance, label, range(lo, min(lo + chunk_size, n)), sched, seed, record, noise_on, dim)
        for lo in range(0, n, chunk_size)
    ]
    samples = np.concatenate([p[0] for p in parts])
    trajs = [tr for p in parts for tr in p[1]] if record else None
    return SampleResult(samples, label, guidance.mode, seed, trajs)


def _sample_chunk(source, guidance, label, indices, sched, seed, record, noise_on, dim):
    T = sched.T
    noise = np.stack([sample_noise(seed, i, T, dim) for i in indices])  # (m, T+1, d)
    Z = noise[:, 0, :].copy()
    m = Z.shape[0]
    if record:
        states = np.empty((m, T + 1, dim))
        states[:, 0] = Z
        su, sc, sg = (np.empty((m, T, dim)) for _ in range(3))
    for t in range(T, 0, -1):
        ec = np.asarray(source.eps(Z, t, label), dtype=np.float64)
        eu = np.asarray(source.eps(Z, t, NULL_LABEL), dtype=np.float64)
        g = guide_batch(eu, ec, guidance)
        if record:
            k = T - t
            su[:, k] = eps_to_score(eu, t, sched)
            sc[:, k] = eps_to_score(ec, t, sched)
            sg[:, k] = eps_to_score(g, t, sched)
        Z = ddpm_step(Z, g, t, sched, noise_on=noise_on, noise=noise[:, T - t + 1, :])
        if record:
            states[:, T - t + 1] = Z
    trajs = []
    if record:
        trajs = [Trajectory(states[j], su[j], sc[j], sg[j], label, seed, i) for j, i in enumerate(indices)]
    return Z, trajs


def write_samples_csv(path, results: list[SampleResult]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        dim = results[0].samples.shape[1] if results else 2
        w.writerow([f"x{i}" for i in range(dim)] + ["label", "mode", "seed"])
        for r in results:
            for x in r.samples:
                w.writerow([repr(float(v)) for v in x] + [r.label, r.mode.value, r.seed])
    return path


def write_trajectories_json(path, result: SampleResult, sched: NoiseSchedule) -> Path:
    if result.trajectories is None:
        raise InvalidInputError("sampling was run without trajectory recording")
    blob = {
        "label": result.label,
        "mode": result.mode.value,
        "seed": result.seed,
        "steps": list(range(sched.T, 0, -1)),
        "score_space": "score",
        "trajectories": [tr.to_json() for tr in result.trajectories],
    }
    path = Path(path)
    path.write_text(json.dumps(blob) + "\n")
    return path


def read_trajectories_json(path) -> list[Trajectory]:
    blob = json.loads(Path(path).read_text())

    def arr(a):
        return None if a is None else np.asarray(a, dtype=np.float64)

    return [
        Trajectory(arr(tr["states"]), arr(tr["uncond_scores"]), arr(tr["cond_scores"]), arr(tr["guided_scores"]),
                   tr["label"], tr["seed"], tr["index"])
        for tr in blob["trajectories"]
    ]
