"""Seeded mini-batch training with Adam or plain SGD.

Training is a pure function of (architecture, dataset, config): weight init,
shuffling, and batch reduction order are all derived from the config seed, so
identical inputs give bit-identical weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .architectures import ArchitectureSpec, Model, init_params
from .errors import ConfigError, NumericError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ConfigError("epochs and batch_size must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


class TrainingDiverged(NumericError):
    """Loss went non-finite; `history` holds the epochs completed so far."""

    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = history


def _stack_dataset(dataset):
    xs, ys = [], []
    for window, target in dataset:
        x = np.asarray(window, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        xs.append(x)
        ys.append(np.asarray(target, dtype=np.float64))
    if not xs:
        raise ConfigError("training dataset is empty")
    return np.stack(xs), np.stack(ys)


def _eval_loss(model: Model, X: np.ndarray, Y: np.ndarray, batch_size: int) -> float:
    total = 0.0
    for lo in range(0, len(X), batch_size):
        xb = X[lo:lo + batch_size]
        yb = Y[lo:lo + batch_size]
        pred = model.forward(xb)
        total += float(np.sum((pred - yb) ** 2))
    return total / Y.size


def train_model(spec: ArchitectureSpec, dataset, cfg: TrainConfig, val_dataset=None,
                allow_large: bool = False):
    """Returns (params, history); history rows are (epoch, train_loss, val_loss).

    val_loss is NaN when no validation set is given. Aborts with
    TrainingDiverged (carrying the history so far) if the loss goes non-finite.
    """
    X, Y = _stack_dataset(dataset)
    Xv = Yv = None
    if val_dataset:
        Xv, Yv = _stack_dataset(val_dataset)

    params = init_params(spec, cfg.seed, allow_large=allow_large)
    model = Model(spec)
    model.bind(params)
    names = model.param_names()

    adam_m = {n: np.zeros_like(params[n]) for n in names} if cfg.optimizer == "adam" else None
    adam_v = {n: np.zeros_like(params[n]) for n in names} if cfg.optimizer == "adam" else None
    step = 0

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(X))
        running = 0.0
        for lo in range(0, len(X), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            xb = X[idx]
            yb = Y[idx]
            pred = model.forward(xb)
            batch_loss = float(np.mean((pred - yb) ** 2))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}", history
                )
            running += batch_loss * len(idx)
            model.backward(2.0 * (pred - yb) / pred.size)
            grads = model.gradients()
            step += 1
            if cfg.optimizer == "adam":
                correct1 = 1.0 - ADAM_BETA1 ** step
                correct2 = 1.0 - ADAM_BETA2 ** step
                for n in names:
                    g = grads[n]
                    adam_m[n] *= ADAM_BETA1
                    adam_m[n] += (1.0 - ADAM_BETA1) * g
                    adam_v[n] *= ADAM_BETA2
                    adam_v[n] += (1.0 - ADAM_BETA2) * g * g
                    params[n] -= cfg.learning_rate * (adam_m[n] / correct1) / (
                        np.sqrt(adam_v[n] / correct2) + ADAM_EPS
                    )
            else:
                for n in names:
                    params[n] -= cfg.learning_rate * grads[n]
        train_loss = running / len(X)
        val_loss = _eval_loss(model, Xv, Yv, cfg.batch_size) if Xv is not None else float("nan")
        history.append((epoch, train_loss, val_loss))
    return params, history


def predict_batch(spec: ArchitectureSpec, params: dict, windows, batch_size: int = 32) -> np.ndarray:
    """Model outputs for a stack of windows, shape (n, time)."""
    X = np.asarray(windows, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    model = Model(spec)
    model.bind(params)
    outputs = [model.forward(X[lo:lo + batch_size]) for lo in range(0, len(X), batch_size)]
    return np.concatenate(outputs, axis=0)


def save_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, train_loss, val_loss in history:
            writer.writerow([epoch, repr(float(train_loss)), repr(float(val_loss))])


def load_history_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["epoch", "train_loss", "val_loss"]:
            raise ConfigError(f"{path}: unexpected history header {header}")
        for row in reader:
            rows.append((int(row[0]), float(row[1]), float(row[2])))
    return rows
