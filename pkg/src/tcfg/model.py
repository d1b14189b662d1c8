"""Conditional epsilon-prediction MLP with hand-written backprop and Adam.

Input is ``concat(z, time_embedding(t), label_embedding(y))``; one hidden
layer with a smooth activation; linear output of the data dimension.  Label
2 is the null (unconditional) label.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import NULL_LABEL, LabeledPoints
from .errors import InvalidInputError
from .schedule import NoiseSchedule

CHECKPOINT_FORMAT = "tcfg-checkpoint"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2", "label_emb")


@dataclass(frozen=True)
class Architecture:
    data_dim: int = 2
    hidden_dim: int = 128
    time_freqs: int = 8
    label_dim: int = 8
    activation: str = "silu"
    time_base: float = 1000.0

    @property
    def input_dim(self) -> int:
        return self.data_dim + 2 * self.time_freqs + self.label_dim


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5000
    learning_rate: float = 1e-3
    batch_size: int = 256
    label_drop_prob: float = 0.1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self) -> None:
        if not 0.0 <= self.label_drop_prob <= 1.0:
            raise InvalidInputError("label_drop_prob must lie in [0, 1]")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.iterations < 0 or self.batch_size < 1:
            raise InvalidInputError("iterations must be >= 0 and batch_size >= 1")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(kind: str, x):
    """Return (activation(x), derivative(x))."""
    if kind == "silu":
        s = _sigmoid(x)
        return x * s, s * (1.0 + x * (1.0 - s))
    if kind == "identity":
        return x, np.ones_like(x)
    raise InvalidInputError(f"unknown activation {kind!r}")


def time_embedding(t, n_freqs: int, base: float) -> np.ndarray:
    """Sinusoidal embedding ``[sin(t f_k), cos(t f_k)]`` with ``f_k = base^(-k/n)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = base ** (-np.arange(n_freqs) / n_freqs)
    arg = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=1)


class ScoreModel:
    """Parameters live in ``self.params`` (a dict of float64 arrays)."""

    def __init__(self, arch: Architecture | None = None, params: dict[str, np.ndarray] | None = None):
        self.arch = arch or Architecture()
        self.params = params if params is not None else {}

    @classmethod
    def initialize(cls, arch: Architecture | None = None, seed: int = 0) -> "ScoreModel":
        arch = arch or Architecture()
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(arch.input_dim)
        params = {
            "W1": rng.uniform(-bound, bound, size=(arch.input_dim, arch.hidden_dim)),
            "b1": np.zeros(arch.hidden_dim),
            "W2": np.zeros((arch.hidden_dim, arch.data_dim)),
            "b2": np.zeros(arch.data_dim),
            "label_emb": rng.standard_normal((3, arch.label_dim)),
        }
        return cls(arch, params)

    def copy(self) -> "ScoreModel":
        return ScoreModel(self.arch, {k: v.copy() for k, v in self.params.items()})

    def _inputs(self, z, t, labels):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.arch.data_dim:
            raise InvalidInputError(f"z has dimension {z.shape[1]}, model expects {self.arch.data_dim}")
        n = z.shape[0]
        labels = np.broadcast_to(np.asarray(labels), (n,))
        if not np.all(np.isin(labels, (0, 1, NULL_LABEL))):
            raise InvalidInputError(f"labels must be in {{0, 1, {NULL_LABEL}}}")
        labels = labels.astype(np.int64)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
        temb = time_embedding(t, self.arch.time_freqs, self.arch.time_base)
        x = np.concatenate([z, temb, self.params["label_emb"][labels]], axis=1)
        return x, labels

    def forward(self, z, t, labels) -> np.ndarray:
        """Predicted noise for a batch (or a single vector) of latents."""
        single = np.asarray(z).ndim == 1
        x, _ = self._inputs(z, t, labels)
        h, _ = _activate(self.arch.activation, x @ self.params["W1"] + self.params["b1"])
        out = h @ self.params["W2"] + self.params["b2"]
        return out[0] if single else out

    __call__ = forward

    def loss_and_grads(self, z, t, labels, target) -> tuple[float, dict[str, np.ndarray]]:
        """Mean over the batch of ``||eps_hat - target||^2`` and its parameter gradients."""
        x, labels = self._inputs(z, t, labels)
        p = self.params
        pre = x @ p["W1"] + p["b1"]
        h, dact = _activate(self.arch.activation, pre)
        out = h @ p["W2"] + p["b2"]
        diff = out - np.atleast_2d(target)
        n = x.shape[0]
        loss = float(np.sum(diff * diff) / n)

        d_out = (2.0 / n) * diff
        d_pre = (d_out @ p["W2"].T) * dact
        d_x = d_pre @ p["W1"].T
        lo = self.arch.data_dim + 2 * self.arch.time_freqs
        d_emb = np.zeros_like(p["label_emb"])
        np.add.at(d_emb, labels, d_x[:, lo:])
        grads = {
            "W1": x.T @ d_pre,
            "b1": d_pre.sum(axis=0),
            "W2": h.T @ d_out,
            "b2": d_out.sum(axis=0),
            "label_emb": d_emb,
        }
        return loss, grads

    # --- checkpoint -------------------------------------------------------

    def to_checkpoint(self, sched: NoiseSchedule) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "schedule_sha256": sched.fingerprint(),
            "schedule_T": sched.T,
            "architecture": asdict(self.arch),
            "parameters": {
                name: {"shape": list(self.params[name].shape), "data": self.params[name].ravel().tolist()}
                for name in PARAM_NAMES
            },
        }

    def save(self, path, sched: NoiseSchedule) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_checkpoint(sched), indent=1) + "\n")
        return path

    @classmethod
    def from_checkpoint(cls, blob: dict, sched: NoiseSchedule | None = None) -> "ScoreModel":
        if blob.get("format") != CHECKPOINT_FORMAT or blob.get("version") != CHECKPOINT_VERSION:
            raise InvalidInputError("not a version-1 tcfg checkpoint")
        if sched is not None and blob["schedule_sha256"] != sched.fingerprint():
            raise InvalidInputError("checkpoint was trained with a different noise schedule")
        arch = Architecture(**blob["architecture"])
        params = {
            name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in blob["parameters"].items()
        }
        return cls(arch, params)

    @classmethod
    def load(cls, path, sched: NoiseSchedule | None = None) -> "ScoreModel":
        return cls.from_checkpoint(json.loads(Path(path).read_text()), sched)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: TrainConfig) -> "Adam":
        return cls(config.learning_rate, config.beta1, config.beta2, config.adam_eps)

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step += 1
        c1 = 1.0 - self.beta1**self.step
        c2 = 1.0 - self.beta2**self.step
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_step(
    model: ScoreModel,
    batch: LabeledPoints,
    sched: NoiseSchedule,
    config: TrainConfig,
    rng: np.random.Generator,
    optimizer: Adam,
) -> float:
    """One noise-prediction update on ``batch``; returns the pre-update loss."""
    n = len(batch)
    if n == 0:
        raise InvalidInputError("empty batch")
    t = rng.integers(1, sched.T + 1, size=n)
    eps = rng.standard_normal(batch.positions.shape)
    drop = rng.random(n) < config.label_drop_prob
    labels = np.where(drop, NULL_LABEL, batch.labels)
    ab = sched.alpha_bars_ext[t][:, None]
    z = np.sqrt(ab) * batch.positions + np.sqrt(1.0 - ab) * eps
    loss, grads = model.loss_and_grads(z, t, labels, eps)
    optimizer.update(model.params, grads)
    return loss


def train(
    model: ScoreModel, data: LabeledPoints, sched: NoiseSchedule, config: TrainConfig
) -> tuple[ScoreModel, np.ndarray]:
    """Train in place for ``config.iterations`` minibatch steps (sampled with replacement)."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    opt = Adam.from_config(config)
    history = np.empty(config.iterations)
    for i in range(config.iterations):
        idx = rng.integers(0, len(data), size=config.batch_size)
        batch = LabeledPoints(data.positions[idx], data.labels[idx])
        history[i] = train_step(model, batch, sched, config, rng, opt)
    return model, history


def grad_check(model: ScoreModel, z, t, labels, target, h: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    Per parameter array the error is ``max|g_a - g_fd| / max(max|g_a|, max|g_fd|)``;
    the maximum over arrays is returned.
    """
    _, analytic = model.loss_and_grads(z, t, labels, target)
    worst = 0.0
    for name in PARAM_NAMES:
        p = model.params[name]
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lp, _ = model.loss_and_grads(z, t, labels, target)
            flat[k] = orig - h
            lm, _ = model.loss_and_grads(z, t, labels, target)
            flat[k] = orig
            nflat[k] = (lp - lm) / (2.0 * h)
        a = analytic[name]
        scale = max(np.abs(a).max(initial=0.0), np.abs(numeric).max(initial=0.0))
        if scale == 0.0:
            continue
        worst = max(worst, float(np.abs(a - numeric).max() / scale))
    return worst
