"""Class- and dataset-level detection accuracy, and replay of the published score table."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .sag import SagReport, detect

REGIMES = ("regular", "shortcut")
TABLE1_SHA256 = "a126666878b619cbf4051797c38bb76a0529d75c47b316e97039b9512a1681e8"
TABLE1_COLUMNS = ("dataset", "reg_c0", "reg_c1", "sc_c0", "sc_c1")
# published footer at epsilon = 0.15: regular c0, regular c1, shortcut c0, shortcut c1,
# regular dataset, shortcut dataset
TABLE1_EXPECTED = (1.000, 1.000, 0.833, 0.792, 1.000, 0.792)
TABLE1_EPSILON = 0.15


class TableParseError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionOutcome:
    dataset_name: str
    regime: str
    true_shortcut_class: int | None
    report: SagReport

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if (self.regime == "regular") != (self.true_shortcut_class is None):
            raise ValueError("a shortcut outcome needs a true class; a regular one must not have one")


def _common_regime(outcomes: Sequence[DetectionOutcome], regime: str) -> None:
    if not outcomes:
        raise ValueError("no outcomes")
    regimes = {o.regime for o in outcomes}
    if regimes != {regime}:
        raise ValueError(f"expected only {regime!r} outcomes, got {sorted(regimes)}")


def class_correct(outcome: DetectionOutcome, class_id: int) -> bool:
    above = outcome.report.sag[class_id] > outcome.report.epsilon
    if outcome.regime == "shortcut" and class_id == outcome.true_shortcut_class:
        return above
    return not above


def dataset_correct(outcome: DetectionOutcome) -> bool:
    """Regular: nothing fires.  Shortcut: the true class is among the classes above epsilon."""
    if outcome.regime == "regular":
        return not outcome.report.detected
    return outcome.report.detected and outcome.true_shortcut_class in outcome.report.flagged_classes


def class_detection_accuracy(outcomes: Sequence[DetectionOutcome], regime: str, class_id: int) -> float:
    _common_regime(outcomes, regime)
    return sum(class_correct(o, class_id) for o in outcomes) / len(outcomes)


def dataset_detection_accuracy(outcomes: Sequence[DetectionOutcome], regime: str) -> float:
    _common_regime(outcomes, regime)
    return sum(dataset_correct(o) for o in outcomes) / len(outcomes)


@dataclass(frozen=True)
class MetricSummary:
    n_datasets: int
    n_classes: int
    class_correct: dict[str, tuple[int, ...]]
    class_accuracy: dict[str, tuple[float, ...]]
    dataset_accuracy: dict[str, float]

    def six(self) -> tuple[float, ...]:
        """(regular c0, regular c1, shortcut c0, shortcut c1, regular dataset, shortcut dataset)."""
        return (*self.class_accuracy["regular"], *self.class_accuracy["shortcut"],
                self.dataset_accuracy["regular"], self.dataset_accuracy["shortcut"])

    def rows(self) -> list[list[str]]:
        rows = [["metric", "regime", "class", "correct", "value"]]
        for regime in REGIMES:
            for c in range(self.n_classes):
                rows.append(["class_detection_accuracy", regime, str(c),
                             str(self.class_correct[regime][c]), f"{self.class_accuracy[regime][c]:.3f}"])
        for regime in REGIMES:
            correct = round(self.dataset_accuracy[regime] * self.n_datasets)
            rows.append(["dataset_detection_accuracy", regime, "", str(correct),
                         f"{self.dataset_accuracy[regime]:.3f}"])
        return rows

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.rows())

    def pretty(self) -> str:
        header = f"{'':34}" + "".join(f"{f'{r} c{c}':>14}" for r in REGIMES for c in range(self.n_classes))
        counts = f"{f'correct (out of {self.n_datasets})':34}" + "".join(
            f"{self.class_correct[r][c]:>14d}" for r in REGIMES for c in range(self.n_classes))
        cls = f"{'class detection accuracy':34}" + "".join(
            f"{self.class_accuracy[r][c]:>14.3f}" for r in REGIMES for c in range(self.n_classes))
        width = 14 * self.n_classes
        ds = f"{'dataset detection accuracy':34}" + "".join(
            f"{self.dataset_accuracy[r]:>{width}.3f}" for r in REGIMES)
        return "\n".join([header, counts, cls, ds])


def summarize(regular: Sequence[DetectionOutcome], shortcut: Sequence[DetectionOutcome]) -> MetricSummary:
    if len(regular) != len(shortcut):
        raise ValueError("regular and shortcut outcome lists must cover the same datasets")
    n_classes = len(regular[0].report.sag)
    groups = {"regular": regular, "shortcut": shortcut}
    correct = {r: tuple(sum(class_correct(o, c) for o in groups[r]) for c in range(n_classes)) for r in REGIMES}
    return MetricSummary(
        n_datasets=len(regular),
        n_classes=n_classes,
        class_correct=correct,
        class_accuracy={r: tuple(class_detection_accuracy(groups[r], r, c) for c in range(n_classes))
                        for r in REGIMES},
        dataset_accuracy={r: dataset_detection_accuracy(groups[r], r) for r in REGIMES},
    )


def default_table1_path() -> Path:
    return Path(str(resources.files("sagdetect") / "data" / "table1.csv"))


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_score_table(path: str | Path) -> list[tuple[str, tuple[float, float], tuple[float, float]]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TABLE1_COLUMNS:
            raise TableParseError(f"{path}: row 1: expected header {','.join(TABLE1_COLUMNS)}")
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TABLE1_COLUMNS):
                raise TableParseError(f"{path}: row {rowno}: expected 5 fields, got {len(row)}")
            try:
                scores = [float(v) for v in row[1:]]
            except ValueError:
                raise TableParseError(f"{path}: row {rowno}: non-numeric score") from None
            rows.append((row[0], (scores[0], scores[1]), (scores[2], scores[3])))
    if not rows:
        raise TableParseError(f"{path}: no data rows")
    return rows


def table1_replay(path: str | Path, epsilon: float = TABLE1_EPSILON,
                  shortcut_class: int = 1) -> MetricSummary:
    """Rebuild both regimes' outcomes from a score table and summarize them."""
    table = read_score_table(path)
    regular = [DetectionOutcome(name, "regular", None, detect(reg, epsilon)) for name, reg, _ in table]
    shortcut = [DetectionOutcome(name, "shortcut", shortcut_class, detect(sc, epsilon)) for name, _, sc in table]
    return summarize(regular, shortcut)


def matches_published(summary: MetricSummary) -> bool:
    return tuple(round(v, 3) for v in summary.six()) == TABLE1_EXPECTED
