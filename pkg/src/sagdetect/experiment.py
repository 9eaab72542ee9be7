"""Paired clean/shortcut experiments: load -> inject -> train -> score, plus file output."""
from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetSplit, SyntheticSpec, load_ucr_tsv, make_synthetic, z_normalize
from .evaluation import DetectionOutcome, dataset_detection_accuracy
from .injector import InjectionReceipt, ShortcutSpec, inject
from .model import DEFAULT_CHANNELS, TrainConfig, TrainRecord, init_model, save_checkpoint, train
from .sag import DEFAULT_EPSILON, VARIANTS, ClassGradientProfile, SagReport, detect, gradient_profile, sag
from .svg import write_line_chart

log = logging.getLogger(__name__)

REGIME_DIRS = {"regular": "clean", "shortcut": "shortcut"}
RUN_FILES = ("train_record.csv", "sag_report.csv", "delta_profile.csv", "loss.svg", "delta.svg")


@dataclass(frozen=True)
class ExperimentConfig:
    data: str | None = None  # UCR path prefix; None -> synthetic
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    shortcut: ShortcutSpec = field(default_factory=ShortcutSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    epsilon: float = DEFAULT_EPSILON
    out: str = "runs"
    seeds: tuple[int, ...] = (0,)
    delta_variant: str = "abs-of-mean"
    channels: tuple[int, ...] = DEFAULT_CHANNELS
    jobs: int = 1
    save_models: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.delta_variant not in VARIANTS:
            raise ValueError(f"delta variant must be one of {VARIANTS}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def dataset_name(self) -> str:
        return Path(self.data).name if self.data else "synthetic"


@dataclass
class JobResult:
    seed: int
    regime: str
    record: TrainRecord
    profile: ClassGradientProfile
    report: SagReport
    receipt: InjectionReceipt | None
    model_params: dict | None = None

    @property
    def key(self) -> tuple[int, int]:
        return self.seed, 0 if self.regime == "regular" else 1


def load_split(cfg: ExperimentConfig, seed: int) -> DatasetSplit:
    """UCR data is z-normalized; synthetic data is used as generated (seeded per run)."""
    if cfg.data:
        split = load_ucr_tsv(cfg.data)
        return DatasetSplit(z_normalize(split.train), z_normalize(split.test))
    return make_synthetic(dataclasses.replace(cfg.synthetic, seed=seed))


def prepare_regime(split: DatasetSplit, regime: str, spec: ShortcutSpec) -> tuple[DatasetSplit, InjectionReceipt | None]:
    if regime == "regular":
        return split, None
    train_set, receipt = inject(split.train, spec)
    used = DatasetSplit(train_set, split.test)
    # the test set must reach the model exactly as loaded
    assert used.test is split.test, "test data passed through the injector"
    return used, receipt


def run_job(cfg: ExperimentConfig, seed: int, regime: str) -> JobResult:
    split = load_split(cfg, seed)
    used, receipt = prepare_regime(split, regime, cfg.shortcut)
    model = init_model(cfg.channels, used.train.class_count, seed)
    model, record = train(model, used, dataclasses.replace(cfg.train, seed=seed))
    profile = gradient_profile(model, used.train, cfg.delta_variant)
    report = detect(sag(profile), cfg.epsilon)
    log.info("seed %d %s: test acc %.3f, SAG %s", seed, regime, record.test_accuracy[-1],
             ", ".join(f"{s:.4f}" for s in report.sag))
    params = model.params if cfg.save_models else None
    return JobResult(seed, regime, record, profile, report, receipt, params)


def _run_job_args(args):
    return run_job(*args)


def run_all(cfg: ExperimentConfig) -> list[JobResult]:
    jobs = [(cfg, seed, regime) for seed in cfg.seeds for regime in ("regular", "shortcut")]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_job_args, jobs))
    else:
        results = [run_job(*j) for j in jobs]
    return sorted(results, key=lambda r: r.key)


def job_dir(out: Path, seed: int, regime: str) -> Path:
    return out / f"seed_{seed}" / REGIME_DIRS[regime]


def write_job(cfg: ExperimentConfig, result: JobResult, out: Path) -> list[Path]:
    d = job_dir(out, result.seed, result.regime)
    d.mkdir(parents=True, exist_ok=True)
    result.record.to_csv(d / "train_record.csv")
    result.report.to_csv(d / "sag_report.csv", cfg.dataset_name, result.regime)
    result.profile.to_csv(d / "delta_profile.csv")
    label = REGIME_DIRS[result.regime]
    write_line_chart(d / "loss.svg", {"train loss": result.record.train_loss, "test loss": result.record.test_loss},
                     title=f"{cfg.dataset_name} seed {result.seed} ({label}): loss", xlabel="epoch",
                     ylabel="cross-entropy", x0=1)
    write_line_chart(d / "delta.svg",
                     {f"class {c}": result.profile.delta[c] for c in range(result.profile.n_classes)},
                     title=f"{cfg.dataset_name} seed {result.seed} ({label}): point-shortcut score",
                     xlabel="time index", ylabel="delta")
    files = [d / name for name in RUN_FILES]
    if result.model_params is not None:
        from .model import ResidualCNN1D
        save_checkpoint(ResidualCNN1D(cfg.channels, result.profile.n_classes, result.model_params), d / "model.ckpt")
        files.append(d / "model.ckpt")
    return files


@dataclass(frozen=True)
class BenchmarkSummary:
    n_seeds: int
    detection_rate: float  # shortcut runs detected with the injected class as argmax
    false_positive_rate: float  # clean runs with any class above epsilon
    dataset_accuracy_shortcut: float
    dataset_accuracy_regular: float
    accuracy_drops: tuple[float, ...]  # clean minus shortcut final test accuracy, per seed
    concentration_rate: float  # shortcut runs whose delta argmax hits the injection position

    @property
    def mean_accuracy_drop(self) -> float:
        return float(np.mean(self.accuracy_drops))

    @property
    def seeds_with_drop(self) -> int:
        return int(sum(d > 0 for d in self.accuracy_drops))


def summarize_benchmark(cfg: ExperimentConfig, results: list[JobResult]) -> BenchmarkSummary:
    by_key = {(r.seed, r.regime): r for r in results}
    target = cfg.shortcut.target_class
    regular = [DetectionOutcome(cfg.dataset_name, "regular", None, by_key[s, "regular"].report) for s in cfg.seeds]
    shortcut = [DetectionOutcome(cfg.dataset_name, "shortcut", target, by_key[s, "shortcut"].report)
                for s in cfg.seeds]
    n = len(cfg.seeds)
    hits = sum(o.report.detected_class == target for o in shortcut)
    fps = sum(o.report.detected for o in regular)
    drops = tuple(by_key[s, "regular"].record.test_accuracy[-1] - by_key[s, "shortcut"].record.test_accuracy[-1]
                  for s in cfg.seeds)
    conc = sum(int(np.argmax(by_key[s, "shortcut"].profile.delta[target])) == cfg.shortcut.position
               for s in cfg.seeds)
    return BenchmarkSummary(n, hits / n, fps / n, dataset_detection_accuracy(shortcut, "shortcut"),
                            dataset_detection_accuracy(regular, "regular"), drops, conc / n)


def summary_rows(cfg: ExperimentConfig, results: list[JobResult]) -> list[list[str]]:
    n_classes = results[0].profile.n_classes
    rows = [["seed", "regime", "final_train_acc", "final_test_acc", "final_train_loss", "final_test_loss"]
            + [f"sag_class{c}" for c in range(n_classes)] + ["detected", "detected_class"]]
    for r in results:
        rec = r.record
        rows.append([str(r.seed), r.regime, f"{rec.train_accuracy[-1]:.6f}", f"{rec.test_accuracy[-1]:.6f}",
                     f"{rec.train_loss[-1]:.6g}", f"{rec.test_loss[-1]:.6g}"]
                    + [f"{s:.6f}" for s in r.report.sag]
                    + [str(int(r.report.detected)), "" if r.report.detected_class is None else str(r.report.detected_class)])
    return rows


def format_table(rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows)


def format_benchmark(summary: BenchmarkSummary, epsilon: float) -> str:
    return "\n".join([
        f"seeds: {summary.n_seeds}, epsilon: {epsilon}",
        f"shortcut detected with injected class: {summary.detection_rate:.2f}",
        f"clean false-positive rate:            {summary.false_positive_rate:.2f}",
        f"dataset detection accuracy (shortcut / regular): "
        f"{summary.dataset_accuracy_shortcut:.2f} / {summary.dataset_accuracy_regular:.2f}",
        f"test accuracy drop, mean: {100 * summary.mean_accuracy_drop:.1f} points "
        f"({summary.seeds_with_drop}/{summary.n_seeds} seeds lower)",
        f"delta argmax at injection position:   {summary.concentration_rate:.2f}",
    ])


def write_outputs(cfg: ExperimentConfig, results: list[JobResult]) -> BenchmarkSummary:
    """Write per-job files, then the summary and manifest from this (single) writer."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r in results:
        files.extend(write_job(cfg, r, out))
    rows = summary_rows(cfg, results)
    with open(out / "summary.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    bench = summarize_benchmark(cfg, results)
    (out / "benchmark.txt").write_text(format_benchmark(bench, cfg.epsilon) + "\n")
    files += [out / "summary.csv", out / "benchmark.txt"]
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path"])
        for f in sorted(str(p.relative_to(out)) for p in files):
            w.writerow([f])
    return bench
