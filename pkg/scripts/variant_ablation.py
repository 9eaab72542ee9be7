"""Compare the abs-of-mean and mean-of-abs point-shortcut scores on the same runs.

    python3 scripts/variant_ablation.py --seeds 0-4
"""
import argparse
import dataclasses

from sagdetect.cli import parse_seeds
from sagdetect.experiment import ExperimentConfig, load_split, prepare_regime
from sagdetect.model import init_model, train
from sagdetect.sag import VARIANTS, detect, gradient_profile, sag


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", default="0-4")
    parser.add_argument("--epochs", type=int, default=100)
    args = parser.parse_args()

    base = ExperimentConfig()
    cfg = dataclasses.replace(base, train=dataclasses.replace(base.train, epochs=args.epochs))
    print(f"{'seed':>4} {'regime':>8} " + " ".join(f"{v:>24}" for v in VARIANTS))
    for seed in parse_seeds(args.seeds):
        split = load_split(cfg, seed)
        for regime in ("regular", "shortcut"):
            used, _ = prepare_regime(split, regime, cfg.shortcut)
            model, _ = train(init_model(cfg.channels, 2, seed), used, dataclasses.replace(cfg.train, seed=seed))
            cells = []
            for variant in VARIANTS:
                r = detect(sag(gradient_profile(model, used.train, variant)), cfg.epsilon)
                cells.append(f"{r.sag[0]:.3f}/{r.sag[1]:.3f} {'D' if r.detected else '-'}")
            print(f"{seed:>4} {regime:>8} " + " ".join(f"{c:>24}" for c in cells))


if __name__ == "__main__":
    main()
