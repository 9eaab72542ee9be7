"""Plant a point shortcut into every training sample of one class."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledSeriesSet


class InjectionBoundsError(IndexError):
    pass


class InjectionClassError(ValueError):
    pass


@dataclass(frozen=True)
class ShortcutSpec:
    """Where and what to write.

    Exactly one amplitude mode applies: ``absolute`` writes that value;
    otherwise the value is ``max(values) + k * std(values)`` over the whole
    clean set.
    """

    target_class: int = 1
    position: int = 0
    width: int = 1
    k: float = 2.0
    absolute: float | None = None

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be >= 1")

    @property
    def amplitude_mode(self) -> str:
        return "relative" if self.absolute is None else "absolute"

    def resolve_amplitude(self, values: np.ndarray) -> float:
        if self.absolute is not None:
            return float(self.absolute)
        return float(values.max() + self.k * values.std())


@dataclass(frozen=True)
class InjectionReceipt:
    mask: np.ndarray  # [n, m] bool
    spec: ShortcutSpec
    injected_value: float


def _check(data: LabeledSeriesSet, spec: ShortcutSpec) -> None:
    if spec.position < 0 or spec.position + spec.width > data.m:
        raise InjectionBoundsError(
            f"cells [{spec.position}, {spec.position + spec.width}) do not fit series of length {data.m}")
    if not 0 <= spec.target_class < data.class_count:
        raise InjectionClassError(f"target class {spec.target_class} not in [0, {data.class_count})")


def inject(data: LabeledSeriesSet, spec: ShortcutSpec) -> tuple[LabeledSeriesSet, InjectionReceipt]:
    _check(data, spec)
    value = spec.resolve_amplitude(data.values)
    mask = np.zeros(data.values.shape, dtype=bool)
    mask[data.labels == spec.target_class, spec.position:spec.position + spec.width] = True
    out = data.values.copy()
    out[mask] = value
    mask.flags.writeable = False
    return data.with_values(out), InjectionReceipt(mask, spec, value)


def verify_receipt(before: LabeledSeriesSet, after: LabeledSeriesSet, receipt: InjectionReceipt) -> bool:
    """True iff ``after`` holds the injected value on masked cells and equals ``before`` elsewhere.

    A masked cell that was left unchanged fails unless it already held the
    injected value.
    """
    if before.values.shape != after.values.shape or receipt.mask.shape != before.values.shape:
        raise ValueError(
            f"shape mismatch: before {before.values.shape}, after {after.values.shape}, "
            f"mask {receipt.mask.shape}")
    mask = receipt.mask
    untouched = np.array_equal(before.values[~mask], after.values[~mask])
    written = np.all(after.values[mask] == receipt.injected_value)
    return bool(untouched and written)
