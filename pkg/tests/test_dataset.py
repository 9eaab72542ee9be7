import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sagdetect.dataset import (DatasetSplit, EmptyDatasetError, FormatError, LabeledSeriesSet, LabelMismatchError,
                               SyntheticSpec, class_counts, load_ucr_tsv, make_synthetic, write_ucr_tsv, z_normalize)


def write_pair(tmp_path, train_lines, test_lines, name="Toy"):
    (tmp_path / f"{name}_TRAIN.tsv").write_text("\n".join(train_lines) + "\n")
    (tmp_path / f"{name}_TEST.tsv").write_text("\n".join(test_lines) + "\n")
    return tmp_path / name


def test_load_smallest_case(tmp_path):
    prefix = write_pair(tmp_path, ["1\t0.0\t0.0", "2\t1.0\t1.0"], ["2\t1.0\t1.0", "1\t0.5\t0.5"])
    split = load_ucr_tsv(prefix)
    np.testing.assert_array_equal(split.train.labels, [0, 1])
    np.testing.assert_array_equal(split.train.values, [[0, 0], [1, 1]])
    np.testing.assert_array_equal(split.test.labels, [1, 0])
    assert split.train.class_count == 2


def test_load_minus_one_labels(tmp_path):
    prefix = write_pair(tmp_path, ["-1\t0.0\t1.0", "1\t1.0\t2.0"], ["1\t3\t4", "-1\t5\t6"])
    split = load_ucr_tsv(prefix)
    np.testing.assert_array_equal(split.train.labels, [0, 1])
    np.testing.assert_array_equal(split.test.labels, [1, 0])


def test_load_ragged_row_names_line(tmp_path):
    prefix = write_pair(tmp_path, ["1\t0\t0", "2\t1\t1", "1\t1"], ["1\t0\t0", "2\t1\t1"])
    with pytest.raises(FormatError, match=":3:"):
        load_ucr_tsv(prefix)


def test_load_unseen_test_label(tmp_path):
    prefix = write_pair(tmp_path, ["1\t0\t0", "2\t1\t1"], ["3\t0\t0"])
    with pytest.raises(LabelMismatchError):
        load_ucr_tsv(prefix)


def test_load_empty_file(tmp_path):
    prefix = write_pair(tmp_path, [""], ["1\t0\t0"])
    with pytest.raises(EmptyDatasetError):
        load_ucr_tsv(prefix)


def test_round_trip_through_tsv(tmp_path):
    split = make_synthetic(SyntheticSpec(n_per_class=5, length=16, seed=3))
    write_ucr_tsv(split, tmp_path / "Synth")
    back = load_ucr_tsv(tmp_path / "Synth")
    np.testing.assert_array_equal(back.train.values, split.train.values)
    np.testing.assert_array_equal(back.test.labels, split.test.labels)


def test_invariants_enforced():
    with pytest.raises(LabelMismatchError):
        LabeledSeriesSet("x", np.zeros((2, 3)), [0, 0], 2)  # class 1 empty
    with pytest.raises(FormatError):
        LabeledSeriesSet("x", [[0.0, np.nan], [1.0, 2.0]], [0, 1], 2)
    with pytest.raises(FormatError):
        LabeledSeriesSet("x", [[0.0], [1.0]], [0, 1], 2)
    a = LabeledSeriesSet("a", np.zeros((2, 4)), [0, 1], 2)
    b = LabeledSeriesSet("b", np.zeros((2, 5)), [0, 1], 2)
    with pytest.raises(FormatError):
        DatasetSplit(a, b)


def test_values_are_read_only():
    s = LabeledSeriesSet("x", np.zeros((2, 3)), [0, 1], 2)
    with pytest.raises(ValueError):
        s.values[0, 0] = 1.0


def test_z_normalize_row():
    s = LabeledSeriesSet("x", [[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]], [0, 1], 2)
    z = z_normalize(s).values
    assert abs(z[0].mean()) < 1e-12
    assert abs(z[0].std() - 1.0) < 1e-12
    np.testing.assert_array_equal(z[1], [0.0, 0.0, 0.0])


def test_z_normalize_random_set(rng):
    s = LabeledSeriesSet("r", rng.normal(3.0, 2.0, size=(10, 32)), np.arange(10) % 2, 2)
    z = z_normalize(s).values
    np.testing.assert_allclose(z.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=1), 1.0, atol=1e-12)


def test_class_counts():
    assert class_counts(LabeledSeriesSet("x", np.zeros((3, 2)), [0, 1, 1], 2)).tolist() == [1, 2]


def test_class_counts_matches_tally(rng):
    labels = np.concatenate([np.arange(4), rng.integers(0, 4, size=50)])
    s = LabeledSeriesSet("x", rng.normal(size=(54, 3)), labels, 4)
    tally = [0] * 4
    for y in labels:
        tally[y] += 1
    assert class_counts(s).tolist() == tally
    assert class_counts(s).sum() == s.n


def test_load_normalize_count_preserves_shape(tmp_path):
    split = make_synthetic(SyntheticSpec(n_per_class=6, length=20, seed=1))
    write_ucr_tsv(split, tmp_path / "S")
    loaded = load_ucr_tsv(tmp_path / "S")
    z = z_normalize(loaded.train)
    assert (z.n, z.m, z.class_count) == (split.train.n, split.train.m, 2)
    np.testing.assert_array_equal(z.labels, split.train.labels)
    assert class_counts(z).tolist() == [6, 6]


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=6, unique=True))
def test_remap_is_order_isomorphic(raw):
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as d:
        lines = [f"{r}\t{i}.0\t{i}.5" for i, r in enumerate(raw)]
        prefix = write_pair(Path(d), lines, lines[::-1])
        split = load_ucr_tsv(prefix)
    mapped = dict(zip(raw, split.train.labels.tolist()))
    for a in raw:
        for b in raw:
            if a < b:
                assert mapped[a] < mapped[b]
    assert sorted(mapped.values()) == list(range(len(raw)))


def test_synthetic_deterministic():
    a = make_synthetic(SyntheticSpec(seed=11))
    b = make_synthetic(SyntheticSpec(seed=11))
    assert a.train.values.tobytes() == b.train.values.tobytes()
    assert a.test.values.tobytes() == b.test.values.tobytes()
    c = make_synthetic(SyntheticSpec(seed=12))
    assert not np.array_equal(a.train.values, c.train.values)


def test_synthetic_noiseless_rows_identical():
    split = make_synthetic(SyntheticSpec(noise=0.0))
    for c in (0, 1):
        rows = split.train.values[split.train.labels == c]
        assert np.all(rows == rows[0])
    assert not np.array_equal(split.train.values[0], split.train.values[-1])


def test_synthetic_train_test_streams_disjoint():
    split = make_synthetic(SyntheticSpec(seed=5))
    assert not np.array_equal(split.train.values, split.test.values)


def test_synthetic_point_zero_uninformative():
    split = make_synthetic(SyntheticSpec(n_per_class=20, length=64, noise=0.1, seed=7))
    x0 = split.train.values[:, 0]
    y = split.train.labels
    diff = abs(x0[y == 0].mean() - x0[y == 1].mean())
    assert diff < 0.5 * x0.std()


@settings(max_examples=30, deadline=None)
@given(n=st.integers(4, 12), m=st.integers(16, 80), noise=st.floats(0, 2), seed=st.integers(0, 2**63 - 1))
def test_synthetic_always_valid(n, m, noise, seed):
    split = make_synthetic(SyntheticSpec(n_per_class=n, length=m, noise=noise, seed=seed))
    for part in (split.train, split.test):
        part.validate()
        assert part.values.shape == (2 * n, m)
        assert class_counts(part).tolist() == [n, n]


@pytest.mark.parametrize("kwargs", [dict(n_per_class=3), dict(length=15), dict(noise=-0.1)])
def test_synthetic_spec_rejects(kwargs):
    with pytest.raises(ValueError):
        SyntheticSpec(**kwargs)


def gunpoint_prefix():
    import os
    from pathlib import Path
    root = os.environ.get("SAGDETECT_UCR_ROOT")
    if not root:
        return None
    for cand in (Path(root) / "GunPoint" / "GunPoint", Path(root) / "GunPoint"):
        if Path(f"{cand}_TRAIN.tsv").is_file():
            return cand
    return None


@pytest.mark.skipif(gunpoint_prefix() is None, reason="set SAGDETECT_UCR_ROOT to a UCR archive containing GunPoint")
def test_gunpoint_shape():
    split = load_ucr_tsv(gunpoint_prefix())
    assert (split.train.n, split.train.m, split.train.class_count) == (50, 150, 2)
    assert class_counts(split.train).sum() == 50
