"""Replay the published detection metrics and sweep the threshold.

    python3 scripts/replay_table1.py [--out runs/table1_sweep.csv]
"""
import argparse
import csv

import numpy as np

from sagdetect.evaluation import default_table1_path, matches_published, table1_replay


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", help="write the epsilon sweep as CSV")
    args = parser.parse_args()

    path = default_table1_path()
    summary = table1_replay(path, 0.15)
    print(summary.pretty())
    print(f"matches published values: {matches_published(summary)}\n")

    rows = [("epsilon", "reg_c0", "reg_c1", "sc_c0", "sc_c1", "reg_dataset", "sc_dataset")]
    for eps in np.round(np.arange(0.05, 0.51, 0.05), 2):
        rows.append((f"{eps:.2f}", *(f"{v:.3f}" for v in table1_replay(path, float(eps)).six())))
    for row in rows:
        print("  ".join(f"{c:>11}" for c in row))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)


if __name__ == "__main__":
    main()
