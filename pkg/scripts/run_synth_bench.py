"""Paired clean/shortcut benchmark on the synthetic family.

    python3 scripts/run_synth_bench.py --seeds 0-9 --jobs 4 --out runs/synth

Any ``sagdetect run`` flag is accepted and passed through.
"""
import sys

from sagdetect.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "runs/synth_bench"]
    sys.exit(main(["synth-bench", *args]))
