"""Finite-difference validation of the full residual CNN's gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .model import DEFAULT_CHANNELS, ResidualCNN1D, init_model

TOLERANCE = 1e-4
STEP = 1e-4


@dataclass(frozen=True)
class ModelGradCheck:
    seed: int
    input_result: ad.GradCheckResult
    param_results: dict[str, ad.GradCheckResult]

    @property
    def max_rel_error(self) -> float:
        return max([self.input_result.max_rel_error] + [r.max_rel_error for r in self.param_results.values()])

    @property
    def n_excluded(self) -> int:
        return len(self.input_result.excluded) + sum(len(r.excluded) for r in self.param_results.values())

    @property
    def n_checked(self) -> int:
        return self.input_result.checked + sum(r.checked for r in self.param_results.values())


def _loss(model: ResidualCNN1D, x: ad.Tensor, labels: np.ndarray, p=None) -> ad.Tensor:
    return ad.softmax_cross_entropy(model.forward(x.tape, x, p), labels)


def check_model(seed: int, length: int = 16, batch: int = 3, n_classes: int = 2,
                channels=DEFAULT_CHANNELS, coords_per_param: int = 4, step: float = STEP) -> ModelGradCheck:
    """Check d(loss)/d(input) on every coordinate and a few coordinates of every parameter.

    Biases are drawn at random rather than left at zero so their gradients
    are exercised away from the symmetric initial point.
    """
    rng = np.random.default_rng(seed)
    model = init_model(channels, n_classes, seed)
    for name, value in model.params.items():
        if name.endswith(".b"):
            model.params[name] = 0.1 * rng.standard_normal(value.shape)
    x = rng.standard_normal((batch, length))
    labels = rng.integers(0, n_classes, size=batch)

    input_result = ad.finite_difference_check(lambda leaf: _loss(model, leaf, labels), x, step)

    param_results = {}
    for name in sorted(model.params):
        base = model.params[name]
        flat = rng.choice(base.size, size=min(coords_per_param, base.size), replace=False)
        idx = [np.unravel_index(i, base.shape) for i in sorted(flat)]

        def f(leaf, name=name):
            tape = leaf.tape
            p = {k: (leaf if k == name else tape.leaf(v, k)) for k, v in model.params.items()}
            return _loss(model, tape.leaf(x), labels, p)

        param_results[name] = ad.finite_difference_check(f, base, step, indices=idx)
    return ModelGradCheck(seed, input_result, param_results)
