"""Point-shortcut score, SAG concentration score, and the thresholded detector."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledSeriesSet
from .model import ResidualCNN1D, input_gradients

VARIANTS = ("abs-of-mean", "mean-of-abs")
DEFAULT_EPSILON = 0.15


class EmptyClassError(ZeroDivisionError):
    pass


class UndefinedScoreError(ValueError):
    """A class whose gradient profile is identically zero has no SAG score."""

    def __init__(self, class_id: int):
        super().__init__(f"class {class_id}: all-zero gradient profile, SAG undefined")
        self.class_id = class_id


@dataclass(frozen=True)
class ClassGradientProfile:
    delta: np.ndarray  # [C, m], >= 0
    class_counts: np.ndarray  # [C]

    @property
    def n_classes(self) -> int:
        return self.delta.shape[0]

    @property
    def length(self) -> int:
        return self.delta.shape[1]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"delta_class{c}" for c in range(self.n_classes)])
            for t in range(self.length):
                w.writerow([t] + [repr(float(v)) for v in self.delta[:, t]])


def point_shortcut_score(G: np.ndarray, labels: np.ndarray, n_classes: int,
                         variant: str = "abs-of-mean") -> ClassGradientProfile:
    """Per-class, per-timestep gradient magnitude.

    ``abs-of-mean`` (default) takes |mean_i G[i, t]| over the class, so
    opposite-signed samples cancel; ``mean-of-abs`` averages |G[i, t]|.
    """
    G = np.asarray(G, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if G.ndim != 2 or labels.shape != (G.shape[0],):
        raise ValueError(f"G must be [n, m] with n labels; got G {G.shape}, labels {labels.shape}")
    if not np.all(np.isfinite(G)):
        raise ValueError("gradient matrix contains non-finite entries")
    if n_classes < 2 or np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes}) with at least 2 classes")
    counts = np.bincount(labels, minlength=n_classes)
    delta = np.empty((n_classes, G.shape[1]))
    for c in range(n_classes):
        if counts[c] == 0:
            raise EmptyClassError(f"class {c} has no samples")
        rows = G[labels == c]
        delta[c] = np.abs(rows.mean(axis=0)) if variant == "abs-of-mean" else np.abs(rows).mean(axis=0)
    return ClassGradientProfile(delta, counts)


def sag(profile: ClassGradientProfile) -> np.ndarray:
    """max_t delta[c, t] / sum_t delta[c, t] for every class c.

    Computed as 1 / sum_t (delta[c, t] / max_t delta[c, t]): the peak entry
    becomes exactly 1, so a flat row gives exactly 1/m and the result never
    leaves [1/m, 1] through rounding.
    """
    peaks = profile.delta.max(axis=1)
    for c, peak in enumerate(peaks):
        if not peak > 0:
            raise UndefinedScoreError(c)
    return 1.0 / (profile.delta / peaks[:, None]).sum(axis=1)


@dataclass(frozen=True)
class SagReport:
    sag: tuple[float, ...]
    epsilon: float
    detected: bool
    detected_class: int | None
    flagged_classes: tuple[int, ...]  # every class with SAG > epsilon

    def csv_header(self) -> list[str]:
        return (["dataset", "regime"] + [f"sag_class{c}" for c in range(len(self.sag))]
                + ["epsilon", "detected", "detected_class"])

    def csv_row(self, dataset: str, regime: str) -> list[str]:
        return ([dataset, regime] + [repr(float(s)) for s in self.sag]
                + [repr(float(self.epsilon)), str(int(self.detected)),
                   "" if self.detected_class is None else str(self.detected_class)])

    def to_csv(self, path: str | Path, dataset: str, regime: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.csv_header())
            w.writerow(self.csv_row(dataset, regime))


def detect(scores, epsilon: float = DEFAULT_EPSILON) -> SagReport:
    """Flag a shortcut when the largest class score strictly exceeds ``epsilon``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("need a non-empty vector of class scores")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    best = int(np.argmax(scores))
    detected = bool(scores[best] > epsilon)
    flagged = tuple(int(c) for c in np.flatnonzero(scores > epsilon))
    return SagReport(tuple(float(s) for s in scores), float(epsilon), detected,
                     best if detected else None, flagged)


def gradient_profile(model: ResidualCNN1D, train_set: LabeledSeriesSet,
                     variant: str = "abs-of-mean") -> ClassGradientProfile:
    G = input_gradients(model, train_set)
    return point_shortcut_score(G, train_set.labels, train_set.class_count, variant)


def score_pipeline(model: ResidualCNN1D, train_set: LabeledSeriesSet, epsilon: float = DEFAULT_EPSILON,
                   variant: str = "abs-of-mean") -> SagReport:
    return detect(sag(gradient_profile(model, train_set, variant)), epsilon)
