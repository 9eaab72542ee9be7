import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sagdetect.dataset import LabeledSeriesSet, SyntheticSpec, make_synthetic
from sagdetect.injector import InjectionBoundsError, InjectionClassError, ShortcutSpec, inject, verify_receipt


def small_set():
    return make_synthetic(SyntheticSpec(n_per_class=5, length=32, seed=2)).train  # 10 x 32


def test_absolute_with_existing_value_is_noop():
    # class 0 has a single row
    s = LabeledSeriesSet("one", [[0.7, 1.0, 2.0], [3.0, 4.0, 5.0]], [0, 1], 2)
    out, receipt = inject(s, ShortcutSpec(target_class=0, position=0, absolute=0.7))
    np.testing.assert_array_equal(out.values, s.values)
    np.testing.assert_array_equal(receipt.mask, [[True, False, False], [False, False, False]])
    assert verify_receipt(s, out, receipt)


def test_relative_amplitude_arithmetic():
    # max 2.0, population std 0.5
    values = np.array([[1.0, 2.0], [1.0, 2.0]])
    assert values.max() == 2.0 and values.std() == 0.5
    s = LabeledSeriesSet("r", values, [0, 1], 2)
    _, receipt = inject(s, ShortcutSpec(k=2.0))
    assert receipt.injected_value == 3.0


def test_exact_cells_modified():
    s = small_set()
    out, receipt = inject(s, ShortcutSpec(target_class=1, position=0, width=1, k=2.0))
    diff = out.values != s.values
    n_class1 = int((s.labels == 1).sum())
    assert diff.sum() == n_class1
    for i in range(s.n):
        for t in range(s.m):
            expect = s.labels[i] == 1 and t == 0
            assert diff[i, t] == expect
            assert receipt.mask[i, t] == expect
    np.testing.assert_array_equal(out.labels, s.labels)


def test_input_not_mutated():
    s = small_set()
    before = s.values.copy()
    inject(s, ShortcutSpec())
    np.testing.assert_array_equal(s.values, before)


def test_verify_identity_pair_is_false():
    s = small_set()
    _, receipt = inject(s, ShortcutSpec())
    assert not verify_receipt(s, s, receipt)


def test_verify_detects_unmasked_mutation():
    s = small_set()
    out, receipt = inject(s, ShortcutSpec())
    rows, cols = np.nonzero(~receipt.mask)
    for i, t in list(zip(rows, cols))[:: max(1, len(rows) // 25)]:
        v = out.values.copy()
        v[i, t] += 1e-9
        assert not verify_receipt(s, out.with_values(v), receipt)


def test_verify_shape_mismatch():
    s = small_set()
    out, receipt = inject(s, ShortcutSpec())
    other = make_synthetic(SyntheticSpec(n_per_class=5, length=33)).train
    with pytest.raises(ValueError):
        verify_receipt(s, other, receipt)


@pytest.mark.parametrize("spec", [ShortcutSpec(position=32), ShortcutSpec(position=30, width=3),
                                  ShortcutSpec(position=-1)])
def test_bounds(spec):
    with pytest.raises(InjectionBoundsError):
        inject(small_set(), spec)


def test_class_out_of_range():
    with pytest.raises(InjectionClassError):
        inject(small_set(), ShortcutSpec(target_class=2))


@settings(max_examples=40, deadline=None)
@given(pos=st.integers(0, 31), width=st.integers(1, 8), cls=st.integers(0, 1),
       amp=st.one_of(st.none(), st.floats(-10, 10)))
def test_receipt_round_trip_and_idempotent_absolute(pos, width, cls, amp):
    s = small_set()
    width = min(width, s.m - pos)
    spec = ShortcutSpec(target_class=cls, position=pos, width=width, absolute=amp)
    out, receipt = inject(s, spec)
    assert verify_receipt(s, out, receipt)
    assert receipt.mask.sum() == width * int((s.labels == cls).sum())
    if amp is not None:
        again, _ = inject(out, spec)
        np.testing.assert_array_equal(again.values, out.values)
