"""Command-line entry point: ``python -m tcfg <command> [options]``."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .analysis import write_report
from .config import RunConfig, format_config, load_config
from .dataset import TwoMoonsSpec, moon_point, two_moons, write_points_csv
from .errors import ConfigError
from .evaluation import EvalReport, bench_overhead
from .guidance import GuidanceConfig, GuidanceMode
from .model import Architecture, ScoreModel, TrainConfig, train
from .plotting import PlotSpec, Series, emit_plot, log_spectrum_series
from .sampler import AnalyticSource, ModelSource, sample, write_samples_csv, write_trajectories_json
from .schedule import NoiseSchedule, linear_beta_schedule

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

log = logging.getLogger("tcfg")

COMMANDS = (
    "gen-data", "train", "sample", "analyze-spectrum", "analyze-alignment",
    "analyze-trajectory", "evaluate", "bench", "repro",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file")
    common.add_argument("--seed", type=int, help="global seed (run.seed)")
    common.add_argument("--out", help="parent directory for run directories (run.out)")
    common.add_argument("--mode", choices=[m.value for m in GuidanceMode], help="guidance mode")
    common.add_argument("--scale", type=float, help="guidance scale w")
    common.add_argument("--steps", type=int, help="number of diffusion steps T")
    common.add_argument("--samples", type=int, help="number of samples to draw")
    common.add_argument("--no-noise", action="store_true", help="deterministic sampling (no ancestral noise)")
    common.add_argument("--oracle", action="store_true", help="use the exact score of the data instead of a model")
    common.add_argument("--record-trajectories", action="store_true", help="store states and scores of every step")
    common.add_argument("--checkpoint", help="trained model checkpoint (JSON) for sample/bench")
    common.add_argument("--no-timestamp", action="store_true", help="use a fixed run directory name")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="tcfg", description="Tangential-damping classifier-free guidance on a toy diffusion model.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "gen-data": "write the two-moons dataset",
        "train": "train the noise-prediction model",
        "sample": "draw guided samples",
        "analyze-spectrum": "singular spectra of exact scores around the embedded moons",
        "analyze-alignment": "alignment of unconditional and conditional singular vectors",
        "analyze-trajectory": "tangent/normal ratio of scores along sampling trajectories",
        "evaluate": "compare guidance modes over several trained seeds",
        "bench": "per-step cost of CFG versus TCFG",
        "repro": "run the whole toy pipeline",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args) -> RunConfig:
    overrides = {}
    for flag, key in (("seed", "run.seed"), ("out", "run.out"), ("mode", "guidance.mode"),
                      ("scale", "guidance.scale"), ("steps", "schedule.T"), ("samples", "sampling.n_samples"),
                      ("checkpoint", "training.checkpoint")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.no_noise:
        overrides["sampling.noise"] = False
    if args.oracle:
        overrides["sampling.oracle"] = True
    if args.record_trajectories:
        overrides["sampling.record_trajectories"] = True
    if args.no_timestamp:
        overrides["run.timestamp"] = False
    return load_config(args.config, overrides)


def make_run_dir(config: RunConfig, command: str) -> Path:
    base = Path(config.run.out)
    name = f"{time.strftime('%Y%m%d-%H%M%S')}-{command}" if config.run.timestamp else command
    run_dir = base / name
    k = 1
    while config.run.timestamp and run_dir.exists():
        k += 1
        run_dir = base / f"{name}-{k}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(format_config(config))
    return run_dir


# --- pipeline pieces -------------------------------------------------------


def schedule_of(config: RunConfig) -> NoiseSchedule:
    s = config.schedule
    return linear_beta_schedule(s.T, s.beta_min, s.beta_max)


def dataset_of(config: RunConfig):
    return two_moons(TwoMoonsSpec(config.dataset.n_samples, config.dataset.noise_std, config.run.seed))


def train_config_of(config: RunConfig) -> TrainConfig:
    t = config.training
    return TrainConfig(t.iterations, t.learning_rate, t.batch_size, t.label_drop_prob, config.run.seed)


def guidance_of(config: RunConfig) -> GuidanceConfig:
    g = config.guidance
    return GuidanceConfig(GuidanceMode(g.mode), g.scale, g.tie_tolerance)


def _write_json(path: Path, blob) -> None:
    path.write_text(json.dumps(blob, indent=1) + "\n")


def _train(config: RunConfig, sched: NoiseSchedule, run_dir: Path) -> ScoreModel:
    data = dataset_of(config)
    model = ScoreModel.initialize(Architecture(hidden_dim=config.training.hidden_dim), config.run.seed)
    log.info("training for %d iterations", config.training.iterations)
    _, history = train(model, data, sched, train_config_of(config))
    model.save(run_dir / "model.json", sched)
    with (run_dir / "loss.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "loss"])
        w.writerows([i, repr(float(v))] for i, v in enumerate(history))
    stride = max(1, history.size // 500)
    pts = np.column_stack([np.arange(history.size)[::stride], history[::stride]])
    emit_plot(PlotSpec("multi-line", run_dir / "loss.svg", [Series("loss", pts, "line")], "iteration", "loss"))
    return model


def _source(config: RunConfig, sched: NoiseSchedule, run_dir: Path):
    if config.sampling.oracle:
        return AnalyticSource(dataset_of(config), sched)
    if config.training.checkpoint:
        return ModelSource(ScoreModel.load(config.training.checkpoint, sched))
    return ModelSource(_train(config, sched, run_dir))


def cmd_gen_data(config, sched, run_dir):
    data = dataset_of(config)
    write_points_csv(run_dir / "data.csv", data)
    series = [Series(f"label {y}", data.with_label(y)) for y in (0, 1)]
    emit_plot(PlotSpec("scatter", run_dir / "data.svg", series, "x0", "x1", "two moons", equal_aspect=True))


def cmd_train(config, sched, run_dir):
    _train(config, sched, run_dir)


def cmd_sample(config, sched, run_dir):
    source = _source(config, sched, run_dir)
    s = config.sampling
    result = sample(source, guidance_of(config), s.label, s.n_samples, sched, config.run.seed,
                    record=s.record_trajectories, noise_on=s.noise)
    write_samples_csv(run_dir / "samples.csv", [result])
    if s.record_trajectories:
        write_trajectories_json(run_dir / "trajectories.json", result, sched)
    emit_plot(PlotSpec("scatter", run_dir / "samples.svg", [Series(result.mode.value, result.samples)],
                       "x0", "x1", f"label {s.label}", equal_aspect=True))


def _geometry_config(config: RunConfig) -> ex.GeometryConfig:
    a = config.analysis
    return ex.GeometryConfig(a.ambient_dim, a.points_per_arc, a.n_samples, a.timesteps, a.anchor_theta,
                             a.anchor_label, config.run.seed)


def cmd_analyze_spectrum(config, sched, run_dir):
    spectrum, _ = ex.geometry_experiment(_geometry_config(config), sched)
    write_report(spectrum, run_dir / "spectrum.json", run_dir / "spectrum.csv")
    series = [log_spectrum_series(f"t={t}", s) for t, s in zip(spectrum.timesteps, spectrum.uncond)]
    emit_plot(PlotSpec("multi-line", run_dir / "spectrum.svg", series, "index", "log10 singular value",
                       "unconditional score spectrum"))
    log.info("gap index per timestep: %s", spectrum.uncond_gap)


def cmd_analyze_alignment(config, sched, run_dir):
    _, alignment = ex.geometry_experiment(_geometry_config(config), sched)
    write_report(alignment, run_dir / "alignment.json", run_dir / "alignment.csv")
    series = []
    for t, a in zip(alignment.timesteps, alignment.indexed):
        series.append(Series(f"t={t}", np.column_stack([np.arange(1, a.size + 1), a]), "line"))
    emit_plot(PlotSpec("multi-line", run_dir / "alignment.svg", series, "index", "|cos|", "indexed alignment"))
    if alignment.greedy is not None:
        series = [Series(f"t={t}", np.column_stack([np.arange(1, a.size + 1), a]), "line")
                  for t, a in zip(alignment.timesteps, alignment.greedy)]
        emit_plot(PlotSpec("multi-line", run_dir / "alignment_greedy.svg", series, "index", "|cos|",
                           "greedy alignment"))


def cmd_analyze_trajectory(config, sched, run_dir):
    a = config.analysis
    tc = ex.TrajectoryConfig(a.trajectory_samples, a.trajectory_points_per_arc, config.sampling.label,
                             GuidanceMode(config.guidance.mode), config.guidance.scale, config.run.seed)
    report = ex.trajectory_experiment(tc, sched)
    write_report(report, run_dir / "trajectory.json", run_dir / "trajectory.csv")
    write_trajectories_json(run_dir / "trajectories.json", report.result, sched)
    theta = np.linspace(0.0, np.pi, 200)
    series = [Series(f"moon {y}", np.stack([moon_point(th, y) for th in theta]), "line") for y in (0, 1)]
    for tr in report.result.trajectories[:8]:
        series.append(Series(f"sample {tr.index}", tr.states, "line"))
    emit_plot(PlotSpec("trajectory-overlay", run_dir / "trajectories.svg", series, "x0", "x1",
                       "sampling trajectories", equal_aspect=True))
    ratio = np.column_stack([report.steps, np.log10(np.maximum(report.median_ratio, 1e-300))])
    emit_plot(PlotSpec("multi-line", run_dir / "ratio.svg", [Series("median", ratio, "line")], "t",
                       "log10 tangent/normal", "unconditional score"))


def cmd_evaluate(config, sched, run_dir):
    t = config.training
    cc = ex.CompareConfig(
        seeds=config.eval.seeds, n_samples=config.eval.n_samples, scale=config.guidance.scale,
        data=TwoMoonsSpec(config.dataset.n_samples, config.dataset.noise_std, 0),
        train=TrainConfig(t.iterations, t.learning_rate, t.batch_size, t.label_drop_prob),
        arch=Architecture(hidden_dim=t.hidden_dim),
    )
    report, samples = ex.compare_modes(cc, sched)
    report.write(run_dir / "eval.json", run_dir / "eval.csv")
    _write_json(run_dir / "ordering.json", ex.ordering_counts(report))
    first = cc.seeds[0]
    series = [Series(mode.value, samples[(first, mode.value)]) for mode in cc.modes]
    emit_plot(PlotSpec("scatter", run_dir / "eval_samples.svg", series, "x0", "x1", f"seed {first}",
                       equal_aspect=True))


def cmd_bench(config, sched, run_dir):
    source = _source(config, sched, run_dir)
    bench = bench_overhead(source, sched, config.eval.bench_samples, config.run.seed, config.guidance.scale,
                           config.sampling.label, config.eval.bench_repeats)
    # wall-clock numbers: the only non-reproducible artifact
    _write_json(run_dir / "bench.json", EvalReport(bench=bench).to_json())
    log.info("cfg %.3g s/step, tcfg %.3g s/step, overhead %.2f%%", bench.cfg_step_median,
             bench.tcfg_step_median, 100 * bench.overhead_fraction)


def cmd_repro(config, sched, run_dir):
    cmd_gen_data(config, sched, run_dir)
    model = _train(config, sched, run_dir)
    ckpt = copy.deepcopy(config)
    ckpt.training.checkpoint = str(run_dir / "model.json")
    cmd_sample(ckpt, sched, run_dir)
    cmd_analyze_spectrum(config, sched, run_dir)
    cmd_analyze_alignment(config, sched, run_dir)
    cmd_analyze_trajectory(config, sched, run_dir)
    cmd_evaluate(config, sched, run_dir)
    bench = bench_overhead(ModelSource(model), sched, config.eval.bench_samples, config.run.seed,
                           config.guidance.scale, config.sampling.label, config.eval.bench_repeats)
    _write_json(run_dir / "bench.json", EvalReport(bench=bench).to_json())


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "analyze-spectrum": cmd_analyze_spectrum,
    "analyze-alignment": cmd_analyze_alignment,
    "analyze-trajectory": cmd_analyze_trajectory,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
    "repro": cmd_repro,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"tcfg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sched = schedule_of(config)
        run_dir = make_run_dir(config, args.command)
        HANDLERS[args.command](config, sched, run_dir)
    except ConfigError as exc:
        print(f"tcfg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"tcfg: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
