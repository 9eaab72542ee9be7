import shutil

import pytest

from sagdetect.cli import main, parse_seeds
from sagdetect.dataset import SyntheticSpec, make_synthetic, write_ucr_tsv
from sagdetect.evaluation import default_table1_path
from sagdetect.experiment import RUN_FILES

TINY = ["--synthetic", "n_per_class=4,length=16", "--channels", "4,8", "--epochs", "3"]


def csv_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_parse_seeds():
    assert parse_seeds("0-3") == (0, 1, 2, 3)
    assert parse_seeds("4,1, 7") == (4, 1, 7)


def test_replay_default(capsys):
    assert main(["replay-table"]) == 0
    out = capsys.readouterr().out
    for v in ("1.000", "0.833", "0.792", "MATCH"):
        assert v in out


def test_replay_other_epsilon(capsys, tmp_path):
    assert main(["replay-table", "--epsilon", "0.5", "--csv", str(tmp_path / "s.csv")]) == 0
    assert "0.833" not in capsys.readouterr().out
    assert (tmp_path / "s.csv").read_text().startswith("metric,")


def test_replay_missing_file(tmp_path):
    assert main(["replay-table", str(tmp_path / "nope.csv")]) == 2


def test_replay_checksum_mismatch(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(default_table1_path().read_text().replace("0.2176", "0.2177"))
    assert main(["replay-table", str(p)]) == 5
    assert main(["replay-table", str(p), "--no-verify"]) == 0


def test_gradcheck_pass_and_repeat(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    first = capsys.readouterr().out
    assert main(["gradcheck", "--seed", "0"]) == 0
    assert capsys.readouterr().out == first
    assert "PASS" in first


def test_gradcheck_sabotaged_fails(capsys):
    assert main(["gradcheck", "--seed", "0", "--sabotage"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_run_layout_and_determinism(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run", *TINY, "--seeds", "0-1", "--out", str(a)]) == 0
    assert main(["run", *TINY, "--seeds", "0-1", "--out", str(b)]) == 0
    assert main(["run", *TINY, "--seeds", "0-1", "--out", str(c), "--jobs", "2"]) == 0
    for seed in (0, 1):
        for regime in ("clean", "shortcut"):
            for name in RUN_FILES:
                assert (a / f"seed_{seed}" / regime / name).is_file()
    for name in ("summary.csv", "benchmark.txt", "manifest.csv"):
        assert (a / name).is_file()
    assert csv_bytes(a) == csv_bytes(b) == csv_bytes(c)
    svg = (a / "seed_0" / "clean" / "loss.svg").read_text()
    assert "<svg" in svg and "<polyline" in svg and "viewBox" in svg


def test_summary_reports_rates(tmp_path, capsys):
    assert main(["run", *TINY, "--seeds", "0-1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.lower()
    assert "shortcut detected with injected class" in out and "clean false-positive rate" in out


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# tiny run\nsynthetic = n_per_class=4,length=16\nchannels=4,8\nepochs=2\nseeds=3\n"
                   f"out={tmp_path / 'from_cfg'}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_cfg" / "seed_3" / "clean" / "train_record.csv").is_file()
    rec = (tmp_path / "from_cfg" / "seed_3" / "clean" / "train_record.csv").read_text().splitlines()
    assert len(rec) == 3  # header + 2 epochs
    assert main(["run", "--config", str(cfg), "--epochs", "1", "--out", str(tmp_path / "flag")]) == 0
    assert len((tmp_path / "flag" / "seed_3" / "clean" / "train_record.csv").read_text().splitlines()) == 2


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert main(["run", "--config", str(cfg)]) == 1


def test_missing_dataset_exit_2(tmp_path):
    assert main(["run", "--data", str(tmp_path / "Nothing"), "--out", str(tmp_path / "o")]) == 2


def test_divergence_exit_3(tmp_path):
    with pytest.warns(RuntimeWarning):
        assert main(["run", *TINY, "--lr", "1e200", "--out", str(tmp_path / "o")]) == 3


def test_write_failure_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["run", *TINY, "--out", str(blocker)]) == 4


def test_ucr_format_smoke(tmp_path):
    write_ucr_tsv(make_synthetic(SyntheticSpec(n_per_class=5, length=24, seed=2)), tmp_path / "Toy")
    assert main(["run", "--data", str(tmp_path / "Toy"), "--channels", "4,8", "--epochs", "2",
                 "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "seed_0" / "shortcut" / "sag_report.csv").read_text().startswith("dataset,regime")


def test_gunpoint_smoke(tmp_path):
    from test_dataset import gunpoint_prefix
    prefix = gunpoint_prefix()
    if prefix is None:
        pytest.skip("set SAGDETECT_UCR_ROOT to a UCR archive containing GunPoint")
    assert main(["run", "--data", str(prefix), "--seed", "0", "--out", str(tmp_path / "o")]) == 0
