"""Training loop: standardization, Adam, batching, per-epoch label alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import seeding
from .model import (
    GnnModel,
    GraphBatch,
    bce_loss,
    concat_batches,
    forward,
    init_model,
    loss_and_grad,
    single_batch,
)


@dataclass
class TrainConfig:
    hidden: int = 32
    epochs: int = 100
    batch_size: int = 8
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0


@dataclass
class TrainingSample:
    """One (instance, augmentation draw) pair; the label may be realigned."""

    instance_id: int
    graph: object
    z: np.ndarray
    label: np.ndarray
    batch: GraphBatch | None = None  # filled in after standardization


@dataclass
class Scaler:
    """Per-channel affine standardization fitted on the training split.

    Being affine and shared across nodes, it preserves the equivariance of
    the network and never separates nodes an orbit ties together.
    """

    c_mean: float
    c_std: float
    b_mean: float
    b_std: float
    w_mean: float
    w_std: float
    z_mean: float
    z_std: float

    def as_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("c_mean", "c_std", "b_mean", "b_std", "w_mean", "w_std", "z_mean", "z_std")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in
                      ("c_mean", "c_std", "b_mean", "b_std", "w_mean", "w_std", "z_mean", "z_std")})


def _stat(values):
    arr = np.concatenate([np.ravel(v) for v in values]) if values else np.zeros(1)
    if arr.size == 0:
        return 0.0, 1.0
    mean = float(arr.mean())
    std = float(arr.std())
    return mean, (std if std > 0.0 else 1.0)


def fit_scaler(samples) -> Scaler:
    c_mean, c_std = _stat([s.graph.var_feats for s in samples])
    b_mean, b_std = _stat([s.graph.cons_feats for s in samples])
    w_mean, w_std = _stat([s.graph.edge_vals for s in samples])
    z_mean, z_std = _stat([s.z for s in samples])
    return Scaler(c_mean, c_std, b_mean, b_std, w_mean, w_std, z_mean, z_std)


def sample_batch(graph, z, scaler: Scaler) -> GraphBatch:
    """Standardized single-graph batch."""
    var_x = np.stack(
        [
            (graph.var_feats - scaler.c_mean) / scaler.c_std,
            (np.asarray(z, dtype=np.float64) - scaler.z_mean) / scaler.z_std,
        ],
        axis=1,
    )
    cons_x = ((graph.cons_feats - scaler.b_mean) / scaler.b_std)[:, None]
    edge_w = (graph.edge_vals - scaler.w_mean) / scaler.w_std
    return single_batch(var_x, cons_x, graph.edge_cons, graph.edge_vars, edge_w)


def predict_probs(model: GnnModel, scaler: Scaler, graph, z) -> np.ndarray:
    return forward(model, sample_batch(graph, z, scaler))


class Adam:
    def __init__(self, size, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class TrainResult:
    model: GnnModel
    scaler: Scaler
    history: list  # (epoch, train_loss, val_loss)
    best_val_loss: float
    best_epoch: int


def train(train_samples, val_samples, config: TrainConfig, aligner=None) -> TrainResult:
    """Train, keeping the parameters from the epoch with lowest val loss.

    `aligner(sample, probs) -> label` is applied once per epoch, before the
    gradient steps, to every training sample (labels are replaced in place)
    and transiently to validation labels when computing the val loss.
    """
    if not train_samples:
        raise ValueError("no training samples")
    scaler = fit_scaler(train_samples)
    for s in list(train_samples) + list(val_samples):
        s.batch = sample_batch(s.graph, s.z, scaler)
        s.label = np.asarray(s.label, dtype=np.float64)

    model = init_model(config.hidden, seed=seeding.seed_for(config.seed, "init"))
    shuffle_rng = seeding.rng_for(config.seed, "shuffle")
    opt = Adam(model.num_params, config.lr, config.beta1, config.beta2, config.adam_eps)

    history = []
    best_val = math.inf
    best_epoch = -1
    best_params = model.params.copy()

    for epoch in range(config.epochs):
        if aligner is not None:
            for s in train_samples:
                probs = forward(model, s.batch)
                s.label = np.asarray(aligner(s, probs), dtype=np.float64)

        order = shuffle_rng.permutation(len(train_samples))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            chunk = [train_samples[i] for i in order[start : start + config.batch_size]]
            batch = concat_batches([s.batch for s in chunk])
            labels = np.concatenate([s.label for s in chunk])
            lsum, grad = loss_and_grad(model, batch, labels)
            opt.step(model.params, grad / len(chunk))
            total += lsum
            count += len(chunk)
        train_loss = total / max(count, 1)

        val_loss = evaluate_loss(model, val_samples, aligner)
        history.append((epoch, train_loss, val_loss))
        if not math.isnan(val_loss) and val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = model.params.copy()

    if best_epoch >= 0:
        model.params[...] = best_params
    return TrainResult(model, scaler, history, best_val, best_epoch)


def evaluate_loss(model, samples, aligner=None) -> float:
    """Mean per-sample BCE; labels are aligned transiently when possible."""
    if not samples:
        return math.nan
    losses = []
    for s in samples:
        probs = forward(model, s.batch)
        label = s.label
        if aligner is not None:
            label = np.asarray(aligner(s, probs), dtype=np.float64)
        losses.append(bce_loss(probs, label))
    return float(np.mean(losses))
