"""Desk-scale 1D residual CNN, Adam training loop, and per-sample input gradients."""
from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import autodiff as ad
from .dataset import DatasetSplit, LabeledSeriesSet

DEFAULT_CHANNELS = (16, 32, 32)
KERNEL = 3


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class ResidualCNN1D:
    """Stem conv -> relu -> residual blocks -> global average pool -> dense head.

    Each block is ``relu(conv(relu(conv(x))) + skip(x))`` where ``skip`` is the
    identity, or a 1x1 conv when the channel count changes.  The stem has
    ``channels[0]`` output channels.
    """

    channels: tuple[int, ...]
    n_classes: int
    params: dict[str, np.ndarray]

    def block_io(self) -> list[tuple[int, int]]:
        ins = (self.channels[0],) + tuple(self.channels[:-1])
        return list(zip(ins, self.channels))

    def forward(self, tape: ad.Tape, x: ad.Tensor, p: dict[str, ad.Tensor] | None = None) -> ad.Tensor:
        """Record the forward pass of ``x`` ([B, m] or [B, 1, m]) on ``tape``."""
        if p is None:
            p = {k: tape.leaf(v, k) for k, v in self.params.items()}
        if x.data.ndim == 2:
            x = _reshape(x, (x.shape[0], 1, x.shape[1]))
        h = ad.relu(ad.conv1d(x, p["stem.w"], p["stem.b"]))
        for i, (cin, cout) in enumerate(self.block_io()):
            pre = f"block{i}"
            z = ad.relu(ad.conv1d(h, p[f"{pre}.conv1.w"], p[f"{pre}.conv1.b"]))
            z = ad.conv1d(z, p[f"{pre}.conv2.w"], p[f"{pre}.conv2.b"])
            skip = h if cin == cout else ad.conv1d(h, p[f"{pre}.proj.w"], p[f"{pre}.proj.b"])
            h = ad.relu(ad.add(z, skip))
        return ad.dense(ad.global_avg_pool(h), p["head.w"], p["head.b"])

    def logits(self, values: np.ndarray) -> np.ndarray:
        tape = ad.Tape()
        return self.forward(tape, tape.leaf(values)).data

    def param_hash(self) -> str:
        h = hashlib.sha256()
        for k in sorted(self.params):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.params[k]).tobytes())
        return h.hexdigest()

    def copy(self) -> "ResidualCNN1D":
        return ResidualCNN1D(self.channels, self.n_classes, {k: v.copy() for k, v in self.params.items()})

    @property
    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))


def _reshape(x: ad.Tensor, shape: tuple[int, ...]) -> ad.Tensor:
    orig = x.shape
    return x.tape._push(x.data.reshape(shape), (x.id,), lambda g: (g.reshape(orig),))


def param_shapes(channels: Iterable[int], n_classes: int) -> dict[str, tuple[int, ...]]:
    channels = tuple(channels)
    if not channels:
        raise ValueError("channels must be non-empty")
    shapes = {"stem.w": (channels[0], 1, KERNEL), "stem.b": (channels[0],)}
    ins = (channels[0],) + channels[:-1]
    for i, (cin, cout) in enumerate(zip(ins, channels)):
        shapes[f"block{i}.conv1.w"] = (cout, cin, KERNEL)
        shapes[f"block{i}.conv1.b"] = (cout,)
        shapes[f"block{i}.conv2.w"] = (cout, cout, KERNEL)
        shapes[f"block{i}.conv2.b"] = (cout,)
        if cin != cout:
            shapes[f"block{i}.proj.w"] = (cout, cin, 1)
            shapes[f"block{i}.proj.b"] = (cout,)
    shapes["head.w"] = (n_classes, channels[-1])
    shapes["head.b"] = (n_classes,)
    return shapes


def init_model(channels: Iterable[int] = DEFAULT_CHANNELS, n_classes: int = 2, seed: int = 0) -> ResidualCNN1D:
    """He-normal weights scaled by fan-in, zero biases."""
    channels = tuple(int(c) for c in channels)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x5EED])))
    params = {}
    for name, shape in param_shapes(channels, n_classes).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
    return ResidualCNN1D(channels, n_classes, params)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int | None = None  # None -> min(16, n)
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainRecord:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def rows(self):
        for e in range(len(self)):
            yield e + 1, self.train_loss[e], self.test_loss[e], self.train_accuracy[e], self.test_accuracy[e]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "test_loss", "train_acc", "test_acc"])
            for epoch, *vals in self.rows():
                w.writerow([epoch] + [repr(float(v)) for v in vals])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainRecord":
        rec = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rec.train_loss.append(float(row["train_loss"]))
                rec.test_loss.append(float(row["test_loss"]))
                rec.train_accuracy.append(float(row["train_acc"]))
                rec.test_accuracy.append(float(row["test_acc"]))
        return rec


class Adam:
    """Bias-corrected Adam over a dict of arrays, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in sorted(params):
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _check_compat(model: ResidualCNN1D, data: LabeledSeriesSet) -> None:
    if data.class_count != model.n_classes:
        raise ValueError(f"model has {model.n_classes} classes, data has {data.class_count}")


def loss_and_grads(model: ResidualCNN1D, values: np.ndarray, labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    tape = ad.Tape()
    p = {k: tape.leaf(v, k) for k, v in model.params.items()}
    loss = ad.softmax_cross_entropy(model.forward(tape, tape.leaf(values), p), labels)
    grads = tape.backward(loss)
    return float(loss.data), {k: grads.get(t) for k, t in p.items()}


def predict_from_logits(logits: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lower class id
    return np.argmax(logits, axis=1)


def predict(model: ResidualCNN1D, data: LabeledSeriesSet) -> np.ndarray:
    _check_compat(model, data)
    return predict_from_logits(model.logits(data.values))


def evaluate_accuracy(model: ResidualCNN1D, data: LabeledSeriesSet) -> float:
    return float(np.mean(predict(model, data) == data.labels))


def evaluate(model: ResidualCNN1D, data: LabeledSeriesSet) -> tuple[float, float]:
    """Mean cross-entropy and accuracy of ``model`` on ``data``."""
    logits = model.logits(data.values)
    logp = ad.log_softmax(logits)
    loss = float(-logp[np.arange(data.n), data.labels].mean())
    acc = float(np.mean(predict_from_logits(logits) == data.labels))
    return loss, acc


def train(model: ResidualCNN1D, split: DatasetSplit, cfg: TrainConfig) -> tuple[ResidualCNN1D, TrainRecord]:
    """Train a copy of ``model``; the input model is left untouched.

    Metrics for epoch e are measured with the parameters after epoch e's last update.
    """
    _check_compat(model, split.train)
    _check_compat(model, split.test)
    model = model.copy()
    train_set = split.train
    n = train_set.n
    batch = cfg.batch_size or min(16, n)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 0xBA7C4])))
    opt = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    record = TrainRecord()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, grads = loss_and_grads(model, train_set.values[idx], train_set.labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            opt.step(model.params, grads)
        tr_loss, tr_acc = evaluate(model, train_set)
        te_loss, te_acc = evaluate(model, split.test)
        if not (np.isfinite(tr_loss) and np.isfinite(te_loss)):
            raise TrainingDiverged(epoch)
        record.train_loss.append(tr_loss)
        record.test_loss.append(te_loss)
        record.train_accuracy.append(tr_acc)
        record.test_accuracy.append(te_acc)
    return model, record


def input_gradients(model: ResidualCNN1D, data: LabeledSeriesSet) -> np.ndarray:
    """G[i, t] = d CE(f(x_i), y_i) / d x_it against the true labels.

    The batch loss is a sum of independent per-sample terms (no batch
    statistics anywhere in the net), so one backward pass yields every row.
    """
    _check_compat(model, data)
    tape = ad.Tape()
    x = tape.leaf(data.values, "x")
    loss = ad.softmax_cross_entropy(model.forward(tape, x), data.labels, reduction="sum")
    return tape.backward(loss).get(x)


# ------------------------------------------------------------ checkpoints
#
# Layout (little endian):
#   b"SAGCKPT\0"            8 bytes magic
#   u32 version (=1)
#   u32 n_classes, u32 n_channels, n_channels * u32 channels
#   u32 n_tensors
#   per tensor: u16 name_len, name utf-8, u8 ndim, ndim * u32 dims, prod(dims) * f64

MAGIC = b"SAGCKPT\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: ResidualCNN1D, path: str | Path) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, model.n_classes),
             struct.pack(f"<I{len(model.channels)}I", len(model.channels), *model.channels),
             struct.pack("<I", len(model.params))]
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> ResidualCNN1D:
    buf = memoryview(Path(path).read_bytes())
    if bytes(buf[:8]) != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    pos = 8

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, buf, pos)
        pos += struct.calcsize(fmt)
        return vals

    version, n_classes = take("<II")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (n_ch,) = take("<I")
    channels = take(f"<{n_ch}I")
    (count,) = take("<I")
    params = {}
    for _ in range(count):
        (name_len,) = take("<H")
        name = bytes(buf[pos:pos + name_len]).decode()
        pos += name_len
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I")
        size = int(np.prod(shape))
        params[name] = np.frombuffer(buf[pos:pos + 8 * size], dtype="<f8").reshape(shape).astype(np.float64)
        pos += 8 * size
    return ResidualCNN1D(tuple(channels), n_classes, params)
