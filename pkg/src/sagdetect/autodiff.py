"""Minimal reverse-mode autodiff over float64 numpy arrays.

Every op appends a node to a :class:`Tape`.  ``Tape.backward`` walks the
nodes in reverse recording order and returns a fresh gradient map, so
calling it twice on the same tape gives identical results.

Only the handful of ops needed by a small 1D residual CNN are provided:
``conv1d``, ``relu``, ``add``, ``dense``, ``global_avg_pool``,
``softmax_cross_entropy`` plus ``sum`` and ``mul`` for tests.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    pass


class ClassIndexError(ValueError):
    pass


class ContractError(ValueError):
    pass


# test hook: when set, relu passes gradients through unmasked
_SABOTAGE_RELU = False


@contextmanager
def sabotaged_relu() -> Iterator[None]:
    """Break the relu backward rule (used to prove the gradient check can fail)."""
    global _SABOTAGE_RELU
    prev, _SABOTAGE_RELU = _SABOTAGE_RELU, True
    try:
        yield
    finally:
        _SABOTAGE_RELU = prev


class Tensor:
    __slots__ = ("data", "tape", "id", "name")

    def __init__(self, data: np.ndarray, tape: "Tape", node_id: int, name: str | None = None):
        self.data = data
        self.tape = tape
        self.id = node_id
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(id={self.id}, shape={self.shape}, name={self.name!r})"


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@dataclass
class _Node:
    out: int
    inputs: tuple[int, ...]
    backward: BackwardFn | None  # None for leaves


@dataclass
class Tape:
    """Ordered record of operations.  Node ids are positions in ``nodes``."""

    debug: bool = False
    nodes: list[_Node] = field(default_factory=list)
    relu_masks: list[np.ndarray] = field(default_factory=list)

    def leaf(self, data, name: str | None = None) -> Tensor:
        arr = np.array(data, dtype=np.float64)  # always copy: leaves own their data
        return self._push(arr, (), None, name)

    def _push(self, data: np.ndarray, inputs: tuple[int, ...], backward: BackwardFn | None,
              name: str | None = None) -> Tensor:
        if self.debug and not np.all(np.isfinite(data)):
            raise FloatingPointError(f"non-finite values produced by node {len(self.nodes)}")
        node_id = len(self.nodes)
        self.nodes.append(_Node(node_id, inputs, backward))
        return Tensor(data, self, node_id, name)

    def backward(self, loss: Tensor) -> "Gradients":
        if loss.tape is not self:
            raise ContractError("loss tensor belongs to a different tape")
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
        for node in reversed(self.nodes[: loss.id + 1]):
            g = grads.get(node.out)
            if g is None or node.backward is None:
                continue
            for parent, pg in zip(node.inputs, node.backward(g)):
                if pg is None:
                    continue
                if parent in grads:
                    grads[parent] = grads[parent] + pg
                else:
                    grads[parent] = pg
        return Gradients(self, grads)


class Gradients:
    """Gradient lookup by tensor or node id; missing entries read as zeros."""

    def __init__(self, tape: Tape, grads: dict[int, np.ndarray]):
        self._tape = tape
        self._grads = grads

    def __getitem__(self, key: Tensor | int) -> np.ndarray:
        node_id = key.id if isinstance(key, Tensor) else key
        g = self._grads.get(node_id)
        if g is None:
            raise KeyError(node_id)
        return g

    def get(self, t: Tensor) -> np.ndarray:
        g = self._grads.get(t.id)
        return np.zeros_like(t.data) if g is None else g

    def __contains__(self, key: Tensor | int) -> bool:
        node_id = key.id if isinstance(key, Tensor) else key
        return node_id in self._grads


def _same_tape(*ts: Tensor) -> Tape:
    tape = ts[0].tape
    for t in ts[1:]:
        if t.tape is not tape:
            raise ContractError("tensors recorded on different tapes")
    return tape


# ---------------------------------------------------------------- ops


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Same-padded cross-correlation: [B, Cin, L] * [Cout, Cin, K] -> [B, Cout, L]."""
    tape = _same_tape(x, kernel, bias)
    if x.data.ndim != 3 or kernel.data.ndim != 3 or bias.data.ndim != 1:
        raise ShapeError("conv1d expects x[B,Cin,L], kernel[Cout,Cin,K], bias[Cout]")
    B, cin, L = x.shape
    cout, kcin, K = kernel.shape
    if kcin != cin or bias.shape[0] != cout:
        raise ShapeError(f"conv1d shape mismatch: x {x.shape}, kernel {kernel.shape}, bias {bias.shape}")
    if K % 2 != 1:
        raise ShapeError(f"conv1d needs an odd kernel size, got {K}")
    pad = (K - 1) // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)))
    cols = sliding_window_view(xp, K, axis=2)  # [B, Cin, L, K]
    # [B, L, Cin*K] @ [Cin*K, Cout]
    flat = np.ascontiguousarray(cols.transpose(0, 2, 1, 3)).reshape(B, L, cin * K)
    wmat = kernel.data.reshape(cout, cin * K)
    out = (flat @ wmat.T).transpose(0, 2, 1) + bias.data[None, :, None]

    def backward(g):
        gt = g.transpose(0, 2, 1)  # [B, L, Cout]
        gw = np.einsum("blo,blf->of", gt, flat).reshape(cout, cin, K)
        gb = g.sum(axis=(0, 2))
        gcols = (gt @ wmat).reshape(B, L, cin, K)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, :, k:k + L] += gcols[:, :, :, k].transpose(0, 2, 1)
        return gxp[:, :, pad:pad + L], gw, gb

    return tape._push(np.ascontiguousarray(out), (x.id, kernel.id, bias.id), backward)


def relu(x: Tensor) -> Tensor:
    tape = x.tape
    mask = x.data > 0
    tape.relu_masks.append(mask)

    def backward(g):
        if _SABOTAGE_RELU:
            return (g,)
        return (g * mask,)

    return tape._push(np.where(mask, x.data, 0.0), (x.id,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return tape._push(a.data + b.data, (a.id, b.id), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    return tape._push(a.data * b.data, (a.id, b.id), lambda g: (g * b.data, g * a.data))


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return x.tape._push(np.array(x.data.sum()), (x.id,),
                        lambda g: (np.broadcast_to(g, x.shape).copy(),))


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map on flattened features: x[B, ...] -> x_flat @ weight.T + bias, weight[out, in]."""
    tape = _same_tape(x, weight, bias)
    B = x.shape[0]
    xf = x.data.reshape(B, -1)
    if weight.data.ndim != 2 or weight.shape[1] != xf.shape[1] or bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense shape mismatch: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    out = xf @ weight.data.T + bias.data

    def backward(g):
        return (g @ weight.data).reshape(x.shape), g.T @ xf, g.sum(axis=0)

    return tape._push(out, (x.id, weight.id, bias.id), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the length axis: [B, C, L] -> [B, C]."""
    if x.data.ndim != 3:
        raise ShapeError(f"global_avg_pool expects [B, C, L], got {x.shape}")
    L = x.shape[2]
    return x.tape._push(x.data.mean(axis=2), (x.id,),
                        lambda g: (np.repeat(g[:, :, None] / L, L, axis=2),))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels, reduction: str = "mean") -> Tensor:
    """Cross-entropy of integer labels under softmax(logits), max-shifted for stability.

    ``reduction="sum"`` keeps per-sample gradients unscaled, which is what
    input-gradient attribution wants.
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"logits must be [B, C], got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    B, C = logits.shape
    if labels.shape != (B,):
        raise ShapeError(f"labels must have shape ({B},), got {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= C):
        raise ClassIndexError(f"labels must lie in [0, {C}), got {labels.min()}..{labels.max()}")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    logp = log_softmax(logits.data)
    picked = -logp[np.arange(B), labels]
    scale = 1.0 / B if reduction == "mean" else 1.0
    loss = picked.sum() * scale

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(B), labels] -= 1.0
        return (grad * (scale * g),)

    return logits.tape._push(np.array(loss), (logits.id,), backward)


# ---------------------------------------------------------------- gradient check


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    checked: int
    excluded: tuple[tuple[int, ...], ...]
    worst_index: tuple[int, ...] | None

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """|a - b| / max(|a|, |b|, floor), elementwise."""
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def finite_difference_check(f: Callable[[Tensor], Tensor], x: np.ndarray, step: float = 1e-4,
                            floor: float = 1e-6, indices=None) -> GradCheckResult:
    """Compare the tape gradient of ``f`` at ``x`` with central differences.

    ``f`` receives a leaf tensor on a fresh tape and must return a scalar
    tensor on that tape.  A coordinate is excluded when either probe point
    flips any relu activation relative to the base point: the central
    difference then straddles a kink and is not an estimate of the
    derivative.  ``indices`` restricts the check to a subset of coordinates.
    """
    x = np.asarray(x, dtype=np.float64)

    def evaluate(point):
        tape = Tape()
        leaf = tape.leaf(point)
        out = f(leaf)
        return tape, leaf, out

    tape, leaf, out = evaluate(x)
    analytic = tape.backward(out).get(leaf)
    base_masks = tape.relu_masks

    def same_pattern(masks):
        return all(np.array_equal(a, b) for a, b in zip(base_masks, masks))

    worst, worst_idx, checked = 0.0, None, 0
    excluded = []
    for idx in (np.ndindex(x.shape) if indices is None else indices):
        idx = tuple(int(i) for i in idx)
        xp = x.copy()
        xp[idx] += step
        tp, _, fp = evaluate(xp)
        xm = x.copy()
        xm[idx] -= step
        tm, _, fm = evaluate(xm)
        if not (same_pattern(tp.relu_masks) and same_pattern(tm.relu_masks)):
            excluded.append(idx)
            continue
        numeric = (float(fp.data) - float(fm.data)) / (2 * step)
        err = float(relative_error(np.array(numeric), np.array(analytic[idx]), floor))
        checked += 1
        if err > worst:
            worst, worst_idx = err, idx
    return GradCheckResult(worst, checked, tuple(excluded), worst_idx)
