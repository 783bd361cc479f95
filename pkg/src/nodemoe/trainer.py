"""Full-batch training with early stopping on validation accuracy."""
from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import FILTER_COEFF, NETWORK_WEIGHT, Tape
from .model import LossWeights, NodeMoE
from .spectral import smoothing_loss

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_acc", "smoothing_loss", "balance_loss")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))

    def part(self, name: str) -> np.ndarray:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split part {name!r}")
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("train", "val", "test")}


def make_split(n: int, labels=None, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> Split:
    """Unstratified random split; sizes round(f * n) for train and val."""
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three nonnegative numbers summing to 1, got {fractions}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fr[0] * n))
    n_val = int(round(fr[1] * n))
    split = Split(np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]),
                  np.sort(perm[n_train + n_val:]))
    if labels is not None:
        labels = np.asarray(labels)
        missing = sorted(set(np.unique(labels).tolist()) - set(np.unique(labels[split.train]).tolist()))
        if missing:
            warnings.warn(f"classes {missing} have no training nodes", stacklevel=2)
    return split


@dataclass
class TrainConfig:
    epochs: int = 1000
    patience: int = 100
    lr_filter: float = 0.01
    lr_network: float = 0.01
    wd_filter: float = 0.0
    wd_network: float = 5e-4
    gamma: float = 0.1
    beta: float = 0.01
    seed: int = 0
    fractions: tuple = (0.6, 0.2, 0.2)

    def validate(self):
        if self.lr_filter < 0 or self.lr_network < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.patience > self.epochs:
            raise ValueError("patience cannot exceed epochs")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.gamma, self.beta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fractions"] = list(self.fractions)
        return d


class Adam:
    """Adam with bias correction and L2 weight decay, settings per param tag."""

    def __init__(self, params, lr: dict, weight_decay: dict, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for i, p in enumerate(self.params):
            lr = self.lr[p.tag]
            g = p.grad + self.wd[p.tag] * p.value
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            if lr == 0:
                continue
            p.value = p.value - lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


def evaluate(model: NodeMoE, data, idx) -> tuple[float, np.ndarray]:
    """Argmax accuracy on ``idx`` (lowest class id wins ties) and per-node flags."""
    logits = model.predict(data.graph, data.features).logits.value
    return accuracy_from_logits(logits, data.labels, idx)


def accuracy_from_logits(logits, labels, idx) -> tuple[float, np.ndarray]:
    idx = np.asarray(idx, dtype=np.int64)
    flags = np.argmax(np.asarray(logits)[idx], axis=1) == np.asarray(labels)[idx]
    acc = float(flags.mean()) if flags.size else float("nan")
    return acc, flags


@dataclass
class TrainResult:
    model: NodeMoE
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("-inf")
    # summed smoothing loss of the filters after the last epoch run
    final_smoothing: float = float("nan")

    def history_csv(self) -> str:
        return history_to_csv(self.history)


def history_to_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in history:
        w.writerow([row["epoch"]] + [repr(float(row[c])) for c in HISTORY_COLUMNS[1:]])
    return buf.getvalue()


def train(model: NodeMoE, data, split: Split, cfg: TrainConfig) -> TrainResult:
    """Adam on the composite loss; returns the best-validation parameters."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    lw = cfg.loss_weights
    params = list(model.params.values())
    opt = Adam(params, {FILTER_COEFF: cfg.lr_filter, NETWORK_WEIGHT: cfg.lr_network},
               {FILTER_COEFF: cfg.wd_filter, NETWORK_WEIGHT: cfg.wd_network})
    g, x, y = data.graph, data.features, np.asarray(data.labels)
    result = TrainResult(model)
    best_state = model.state()
    stale = 0
    for epoch in range(cfg.epochs):
        for p in params:
            p.zero_grad()
        tape = Tape()
        fwd = model.forward(tape, g, x, rng)
        loss, parts = model.total_loss(fwd, y, split.train, lw)
        if not np.isfinite(parts["total"]):
            raise TrainingDiverged(f"loss became {parts['total']} at epoch {epoch}: {parts}")
        tape.backward(loss)
        opt.step()

        logits = model.predict(g, x).logits.value
        train_acc, _ = accuracy_from_logits(logits, y, split.train)
        val_acc, _ = accuracy_from_logits(logits, y, split.val)
        result.history.append({
            "epoch": epoch, "train_loss": parts["total"], "train_acc": train_acc,
            "val_acc": val_acc, "smoothing_loss": parts["smoothing"], "balance_loss": parts["balance"],
        })
        if val_acc > result.best_val:
            result.best_val = val_acc
            result.best_epoch = epoch
            best_state = model.state()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.debug("early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break
    result.final_smoothing = sum(smoothing_loss(f, model.grid) for f in model.filters())
    model.load_state(best_state)
    return result
