"""Labeled univariate time-series datasets: UCR loading, normalization, synthesis."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    pass


class FormatError(DatasetError):
    pass


class LabelMismatchError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


@dataclass(frozen=True)
class LabeledSeriesSet:
    name: str
    values: np.ndarray  # [n, m] float64
    labels: np.ndarray  # [n] int64
    class_count: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        values.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        self.validate()

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] == 0:
            raise EmptyDatasetError(f"{self.name}: values must be a non-empty n x m matrix")
        if self.values.shape[1] < 2:
            raise FormatError(f"{self.name}: series length must be >= 2, got {self.values.shape[1]}")
        if self.labels.shape != (self.values.shape[0],):
            raise FormatError(f"{self.name}: {self.labels.shape[0]} labels for {self.values.shape[0]} rows")
        if self.class_count < 2:
            raise DatasetError(f"{self.name}: need at least 2 classes, got {self.class_count}")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise LabelMismatchError(f"{self.name}: labels outside [0, {self.class_count})")
        missing = np.setdiff1d(np.arange(self.class_count), self.labels)
        if missing.size:
            raise LabelMismatchError(f"{self.name}: classes without samples: {missing.tolist()}")
        if not np.all(np.isfinite(self.values)):
            raise FormatError(f"{self.name}: values contain NaN or Inf")

    def with_values(self, values: np.ndarray, name: str | None = None) -> "LabeledSeriesSet":
        return LabeledSeriesSet(name or self.name, values, self.labels, self.class_count)


@dataclass(frozen=True)
class DatasetSplit:
    train: LabeledSeriesSet
    test: LabeledSeriesSet

    def __post_init__(self):
        if self.train.m != self.test.m:
            raise FormatError(f"train length {self.train.m} != test length {self.test.m}")
        if self.train.class_count != self.test.class_count:
            raise LabelMismatchError("train and test disagree on the number of classes")


def _read_tsv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    raw_labels, rows = [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            try:
                nums = [float(v) for v in fields]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(nums)
            elif len(nums) != width:
                raise FormatError(f"{path}:{lineno}: expected {width - 1} values, got {len(nums) - 1}")
            raw_labels.append(nums[0])
            rows.append(nums[1:])
    if not rows:
        raise EmptyDatasetError(f"{path}: no samples")
    return np.array(raw_labels), np.array(rows, dtype=np.float64)


def load_ucr_tsv(path: str | Path) -> DatasetSplit:
    """Read ``<path>_TRAIN.tsv`` and ``<path>_TEST.tsv``.

    Raw labels are remapped to 0..C-1 by ascending order of the distinct
    training labels; a test label never seen in training is an error.
    """
    path = Path(path)
    name = path.name
    train_file = path.parent / f"{name}_TRAIN.tsv"
    test_file = path.parent / f"{name}_TEST.tsv"
    ytr, xtr = _read_tsv(train_file)
    yte, xte = _read_tsv(test_file)
    classes = np.unique(ytr)
    unseen = np.setdiff1d(np.unique(yte), classes)
    if unseen.size:
        raise LabelMismatchError(f"{test_file}: labels {unseen.tolist()} not present in training data")
    C = len(classes)
    return DatasetSplit(
        LabeledSeriesSet(name, xtr, np.searchsorted(classes, ytr), C),
        LabeledSeriesSet(name, xte, np.searchsorted(classes, yte), C),
    )


def write_ucr_tsv(split: DatasetSplit, path: str | Path) -> None:
    """Write a split back out in the UCR convention (labels as mapped ids)."""
    path = Path(path)
    for suffix, part in (("TRAIN", split.train), ("TEST", split.test)):
        with open(path.parent / f"{path.name}_{suffix}.tsv", "w") as fh:
            for y, row in zip(part.labels, part.values):
                fh.write("\t".join([str(int(y))] + [repr(float(v)) for v in row]) + "\n")


def z_normalize(data: LabeledSeriesSet, tol: float = 1e-8) -> LabeledSeriesSet:
    """Per-row zero mean / unit population std; near-constant rows are only centered."""
    x = data.values
    centered = x - x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    out = np.where(std < tol, centered, centered / np.where(std < tol, 1.0, std))
    return data.with_values(out)


def class_counts(data: LabeledSeriesSet) -> np.ndarray:
    return np.bincount(data.labels, minlength=data.class_count)


SYNTH_FAMILIES = ("sine", "sine_bump")


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-class family: class 0 = sine + noise, class 1 = sine + centered bump + noise.

    The bump is a Gaussian of height ``bump_height`` and width ``bump_width``
    (as a fraction of the series length) centred at m/2, lowered and rescaled
    so it is exactly zero from t = 0 outward: position 0 carries no class
    information in clean data.
    """

    n_per_class: int = 20
    length: int = 64
    noise: float = 0.03
    seed: int = 0
    periods: float = 1.0
    bump_height: float = 0.1
    bump_width: float = 0.3

    def __post_init__(self):
        if self.n_per_class < 4:
            raise ValueError("n_per_class must be >= 4")
        if self.length < 16:
            raise ValueError("length must be >= 16")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def base_waveform(spec: SyntheticSpec, family: str) -> np.ndarray:
    if family not in SYNTH_FAMILIES:
        raise ValueError(f"unknown waveform family {family!r}")
    t = np.arange(spec.length, dtype=np.float64)
    wave = np.sin(2 * np.pi * spec.periods * t / spec.length)
    if family == "sine_bump":
        centre, width = spec.length / 2, spec.bump_width * spec.length
        g = np.exp(-0.5 * ((t - centre) / width) ** 2)
        g0 = np.exp(-0.5 * (centre / width) ** 2)
        wave = wave + spec.bump_height * np.clip((g - g0) / (1 - g0), 0.0, None)
    return wave


def _noise_stream(seed: int, split: int, index: int) -> np.random.Generator:
    # Philox is counter-based; keying on (seed, split, sample) makes every
    # draw independent of generation order.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, split, index])))


def make_synthetic(spec: SyntheticSpec, name: str = "synthetic") -> DatasetSplit:
    waves = [base_waveform(spec, fam) for fam in SYNTH_FAMILIES]
    parts = []
    for split in (0, 1):
        rows, labels = [], []
        for c, wave in enumerate(waves):
            for i in range(spec.n_per_class):
                idx = c * spec.n_per_class + i
                noise = _noise_stream(spec.seed, split, idx).standard_normal(spec.length)
                rows.append(wave + spec.noise * noise)
                labels.append(c)
        parts.append(LabeledSeriesSet(name, np.array(rows), np.array(labels), len(waves)))
    return DatasetSplit(*parts)
