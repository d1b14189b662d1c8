"""Run configuration: flat ``section.key = value`` text with typed defaults.

Blank lines and ``#`` comments are ignored.  Every key has a default; unknown
keys and values that do not parse as the default's type are rejected.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, MissingConfigFileError
from .guidance import GuidanceMode


@dataclass
class DatasetSection:
    n_samples: int = 10_000
    noise_std: float = 0.05


@dataclass
class ScheduleSection:
    T: int = 100
    beta_min: float = 1e-4
    beta_max: float = 0.02


@dataclass
class TrainingSection:
    iterations: int = 5000
    learning_rate: float = 1e-3
    batch_size: int = 256
    label_drop_prob: float = 0.1
    hidden_dim: int = 128
    checkpoint: str = ""


@dataclass
class GuidanceSection:
    mode: str = "tcfg"
    scale: float = 2.0
    tie_tolerance: float = 1e-9


@dataclass
class SamplingSection:
    n_samples: int = 500
    label: int = 0
    noise: bool = True
    oracle: bool = False
    record_trajectories: bool = False


@dataclass
class AnalysisSection:
    ambient_dim: int = 10
    points_per_arc: int = 4000
    n_samples: int = 2000
    timesteps: tuple[int, ...] = (1, 10, 30, 50)
    anchor_theta: float = math.pi / 2
    anchor_label: int = 0
    trajectory_samples: int = 200
    trajectory_points_per_arc: int = 2000


@dataclass
class EvalSection:
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    n_samples: int = 500
    bench_samples: int = 500
    bench_repeats: int = 3


@dataclass
class RunSection:
    seed: int = 0
    out: str = "runs"
    timestamp: bool = True


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    guidance: GuidanceSection = field(default_factory=GuidanceSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def validate(self) -> "RunConfig":
        try:
            GuidanceMode(self.guidance.mode)
        except ValueError:
            raise ConfigError(f"guidance.mode must be one of {[m.value for m in GuidanceMode]}") from None
        if self.sampling.label not in (0, 1):
            raise ConfigError("sampling.label must be 0 or 1")
        if self.schedule.T < 1:
            raise ConfigError("schedule.T must be positive")
        if not self.eval.seeds:
            raise ConfigError("eval.seeds must not be empty")
        return self


def _section_names() -> list[str]:
    return [f.name for f in dataclasses.fields(RunConfig)]


def _parse_value(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        if isinstance(default, tuple):
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError:
        kind = "comma-separated integers" if isinstance(default, tuple) else type(default).__name__
        raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def set_value(config: RunConfig, key: str, raw) -> None:
    """Set ``section.key`` from text (or an already-typed value)."""
    section, _, name = key.partition(".")
    if section not in _section_names() or not name:
        raise ConfigError(f"unknown config key {key!r}")
    obj = getattr(config, section)
    if name not in {f.name for f in dataclasses.fields(obj)}:
        raise ConfigError(f"unknown config key {key!r}")
    default = getattr(obj, name)
    value = _parse_value(raw, default, key) if isinstance(raw, str) else raw
    setattr(obj, name, value)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    config = RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        set_value(config, key.strip(), value)
    return config.validate()


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (if given), then apply ``overrides`` (``section.key -> value``)."""
    if path is None:
        config = RunConfig()
    else:
        p = Path(path)
        if not p.is_file():
            raise MissingConfigFileError(f"config file not found: {p}")
        config = parse_config_text(p.read_text(), str(p))
    for key, value in (overrides or {}).items():
        set_value(config, key, value)
    return config.validate()


def format_config(config: RunConfig) -> str:
    lines = []
    for section in _section_names():
        obj = getattr(config, section)
        for f in dataclasses.fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"
