"""Command-line harness: ``run``, ``synth-bench``, ``replay-table``, ``gradcheck``.

Settings come from built-in defaults, then an optional flat ``key=value``
config file (``--config``), then command-line flags.  Config keys are the
long flag names without the leading dashes, e.g. ``inject-pos=0``.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .dataset import DatasetError, SyntheticSpec
from .evaluation import (TABLE1_EPSILON, TABLE1_EXPECTED, TABLE1_SHA256, TableParseError, default_table1_path,
                         file_sha256, matches_published, table1_replay)
from .experiment import ExperimentConfig, format_benchmark, format_table, run_all, summary_rows, write_outputs
from .injector import ShortcutSpec
from .model import DEFAULT_CHANNELS, TrainConfig, TrainingDiverged
from .sag import DEFAULT_EPSILON, VARIANTS

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_LOAD = 2
EXIT_DIVERGED = 3
EXIT_WRITE = 4
EXIT_CHECKSUM = 5

log = logging.getLogger("sagdetect")

# flag name -> (type, help)
RUN_FLAGS = {
    "data": (str, "UCR path prefix; reads <prefix>_TRAIN.tsv and <prefix>_TEST.tsv"),
    "synthetic": (str, "synthetic family overrides, e.g. 'n_per_class=20,length=64,noise=0.03'"),
    "epsilon": (float, f"detection threshold (default {DEFAULT_EPSILON})"),
    "seed": (int, "single seed"),
    "seeds": (str, "seed list: '0,1,2' or a range '0-9'"),
    "epochs": (int, "training epochs (default 100)"),
    "lr": (float, "Adam learning rate (default 0.001)"),
    "batch": (int, "batch size (default min(16, n))"),
    "inject-class": (int, "class that receives the shortcut (default 1)"),
    "inject-pos": (int, "first time index overwritten (default 0)"),
    "inject-width": (int, "number of time indices overwritten (default 1)"),
    "amplitude-k": (float, "relative amplitude: max + k * std of the clean train set (default 2)"),
    "amplitude-abs": (float, "absolute amplitude; overrides --amplitude-k"),
    "out": (str, "output directory (default runs)"),
    "delta-variant": (str, f"point-shortcut score variant {VARIANTS}"),
    "channels": (str, "residual block channels, e.g. '16,32,32'"),
    "jobs": (int, "parallel worker processes (default 1)"),
}


def parse_seeds(text: str) -> tuple[int, ...]:
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


def parse_kv_file(path: str | Path) -> dict[str, str]:
    settings = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in RUN_FLAGS and key not in ("save-models",):
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        settings[key] = value
    return settings


def parse_synthetic(text: str | None) -> SyntheticSpec:
    if not text:
        return SyntheticSpec()
    types = {f.name: f.type for f in dataclasses.fields(SyntheticSpec)}
    kwargs = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in types:
            raise ValueError(f"unknown synthetic field {key!r}; choose from {sorted(types)}")
        kwargs[key] = int(value) if types[key] in (int, "int") else float(value)
    return SyntheticSpec(**kwargs)


def build_config(settings: dict[str, object], default_seeds: tuple[int, ...] = (0,)) -> ExperimentConfig:
    def get(key, cast=None):
        value = settings.get(key)
        if value is None:
            return None
        return cast(value) if cast else value

    if get("seeds") is not None:
        seeds = parse_seeds(get("seeds"))
    elif get("seed") is not None:
        seeds = (get("seed", int),)
    else:
        seeds = default_seeds
    amplitude_abs = get("amplitude-abs", float)
    shortcut = ShortcutSpec(
        target_class=get("inject-class", int) if get("inject-class") is not None else 1,
        position=get("inject-pos", int) if get("inject-pos") is not None else 0,
        width=get("inject-width", int) if get("inject-width") is not None else 1,
        k=get("amplitude-k", float) if get("amplitude-k") is not None else 2.0,
        absolute=amplitude_abs,
    )
    train = TrainConfig(
        learning_rate=get("lr", float) if get("lr") is not None else 1e-3,
        epochs=get("epochs", int) if get("epochs") is not None else 100,
        batch_size=get("batch", int),
    )
    channels = tuple(int(c) for c in str(get("channels")).split(",")) if get("channels") else DEFAULT_CHANNELS
    save = str(settings.get("save-models", "false")).lower() in ("1", "true", "yes")
    return ExperimentConfig(
        data=get("data"),
        synthetic=parse_synthetic(get("synthetic")),
        shortcut=shortcut,
        train=train,
        epsilon=get("epsilon", float) if get("epsilon") is not None else DEFAULT_EPSILON,
        out=get("out") or "runs",
        seeds=seeds,
        delta_variant=get("delta-variant") or "abs-of-mean",
        channels=channels,
        jobs=get("jobs", int) or 1,
        save_models=save,
    )


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value settings file; flags override it")
    for name, (typ, help_text) in RUN_FLAGS.items():
        if name == "synthetic":
            p.add_argument("--synthetic", nargs="?", const="", default=None, help=help_text)
        else:
            p.add_argument(f"--{name}", type=typ, default=None, help=help_text)
    p.add_argument("--save-models", action="store_true", default=None,
                   help="also write model.ckpt per job")


def _settings_from_args(args: argparse.Namespace) -> dict[str, object]:
    settings: dict[str, object] = {}
    if args.config:
        settings.update(parse_kv_file(args.config))
    for name in list(RUN_FLAGS) + ["save-models"]:
        value = getattr(args, name.replace("-", "_"))
        if value is not None:
            settings[name] = value
    if settings.get("data") and args.synthetic is not None:
        raise ValueError("--data and --synthetic are mutually exclusive")
    if args.synthetic is not None:
        settings.pop("data", None)
    return settings


def _execute(cfg: ExperimentConfig) -> int:
    try:
        results = run_all(cfg)
    except (DatasetError, FileNotFoundError) as exc:
        print(f"error: could not load dataset: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    try:
        bench = write_outputs(cfg, results)
    except OSError as exc:
        print(f"error: could not write outputs: {exc}", file=sys.stderr)
        return EXIT_WRITE
    print(format_table(summary_rows(cfg, results)))
    print()
    print(format_benchmark(bench, cfg.epsilon))
    return EXIT_OK


def cmd_run(args: argparse.Namespace, default_seeds: tuple[int, ...] = (0,)) -> int:
    try:
        cfg = build_config(_settings_from_args(args), default_seeds)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return _execute(cfg)


def cmd_synth_bench(args: argparse.Namespace) -> int:
    if args.data:
        print("error: synth-bench runs the synthetic family only", file=sys.stderr)
        return EXIT_FAIL
    return cmd_run(args, default_seeds=tuple(range(10)))


def cmd_replay_table(args: argparse.Namespace) -> int:
    path = Path(args.fixture) if args.fixture else default_table1_path()
    if not path.is_file():
        print(f"error: fixture not found: {path}", file=sys.stderr)
        return EXIT_LOAD
    if not args.no_verify and file_sha256(path) != TABLE1_SHA256:
        print(f"error: checksum mismatch for {path}", file=sys.stderr)
        return EXIT_CHECKSUM
    try:
        summary = table1_replay(path, args.epsilon)
    except (TableParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    print(f"epsilon = {args.epsilon}")
    print(summary.pretty())
    if args.csv:
        summary.to_csv(args.csv)
    if args.epsilon == TABLE1_EPSILON:
        ok = matches_published(summary)
        expected = "/".join(f"{v:.3f}" for v in TABLE1_EXPECTED)
        print(f"published values {expected}: {'MATCH' if ok else 'MISMATCH'}")
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    from . import autodiff
    from .gradcheck import STEP, TOLERANCE, check_model

    seeds = parse_seeds(args.seeds) if args.seeds else (args.seed,)
    worst = 0.0
    for seed in seeds:
        if args.sabotage:
            with autodiff.sabotaged_relu():
                res = check_model(seed, step=STEP)
        else:
            res = check_model(seed, step=STEP)
        worst = max(worst, res.max_rel_error)
        print(f"seed {seed}: max relative error {res.max_rel_error:.3e} "
              f"({res.n_checked} coordinates checked, {res.n_excluded} excluded at relu kinks)")
    passed = worst < TOLERANCE
    print(f"max relative error {worst:.3e} {'<' if passed else '>='} {TOLERANCE:g}: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sagdetect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train clean and shortcut models per seed and score them")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth-bench", help="multi-seed benchmark on the synthetic family (seeds 0-9)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_synth_bench)

    p = sub.add_parser("replay-table", help="recompute the detection metrics from the shipped score table")
    p.add_argument("fixture", nargs="?", help="score CSV (default: shipped table)")
    p.add_argument("--epsilon", type=float, default=TABLE1_EPSILON)
    p.add_argument("--csv", help="also write the summary as CSV")
    p.add_argument("--no-verify", action="store_true", help="skip the checksum (for custom tables)")
    p.set_defaults(func=cmd_replay_table)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model's gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="seed list, e.g. '0-4'")
    p.add_argument("--sabotage", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
