"""Analytic gradients, Adam, early-stopped training and evaluation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from bankgcn.errors import ConfigError, TrainingFault
from bankgcn.graph import batch_graphs
from bankgcn.layer import bank_backward, diversity_penalty_and_grad
from bankgcn.model import forward_cached, log_softmax, readout_backward, total_omega

logger = logging.getLogger(__name__)

WEIGHT_DECAY_CHOICES = (0.0, 1e-5, 1e-4)
GAMMA_CHOICES = (0.0, 0.1, 10.0)


@dataclass(frozen=True)
class LRDecay:
    factor: float = 0.1
    plateau_patience: int = 20
    min_lr: float = 1e-5


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 30
    weight_decay: float = 0.0
    gamma: float = 0.0
    seed: int = 0
    lr_decay: LRDecay | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be at least 1")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.weight_decay < 0 or self.gamma < 0:
            raise ConfigError("weight_decay and gamma must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.weight_decay not in WEIGHT_DECAY_CHOICES:
            logger.info("weight_decay=%g is outside the usual grid %s", self.weight_decay, WEIGHT_DECAY_CHOICES)
        if self.gamma not in GAMMA_CHOICES:
            logger.info("gamma=%g is outside the usual grid %s", self.gamma, GAMMA_CHOICES)


def loss_and_gradients(params, b):
    """Objective value and its exact gradient for every trainable tensor.

    Returns ``(total, grads)``; ``grads`` is keyed like
    ``params.tensors(trainable_only=True)``.
    """
    cache = forward_cached(params, b)
    B = b.num_graphs
    labels = b.labels
    lsm = log_softmax(cache.logits)
    loss = float(-lsm[np.arange(B), labels].mean())
    omegas = [diversity_penalty_and_grad(layer.alpha) for layer in params.layers]
    omega = float(sum(o[0] for o in omegas))
    total = loss + params.gamma * omega
    if not np.isfinite(total):
        raise TrainingFault(f"non-finite objective: loss={loss!r}, omega={omega!r}")

    dlogits = np.exp(lsm)
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    grads = {}
    dh = dlogits @ params.head_W.T
    shapes = [y.shape for y in cache.layer_outputs]
    d_out = readout_backward(dh, shapes, b, cache.argmaxes)
    dX_next = None
    layer_grads = [None] * len(params.layers)
    for l in range(len(params.layers) - 1, -1, -1):
        dY = d_out[l] if dX_next is None else d_out[l] + dX_next
        dX_next, g = bank_backward(params.layers[l], cache.layer_caches[l], dY)
        g["alpha"] = g["alpha"] + params.gamma * omegas[l][1]
        layer_grads[l] = g
    for l, g in enumerate(layer_grads):
        grads[f"layer{l}.W"] = g["W"]
        grads[f"layer{l}.b"] = g["b"]
        if not params.frozen_filters:
            grads[f"layer{l}.alpha"] = g["alpha"]
    grads["head.W"] = cache.h.T @ dlogits
    grads["head.b"] = dlogits.sum(axis=0)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingFault(f"non-finite gradient in {name}")
    return total, grads


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads, config, lr=None):
    """One bias-corrected Adam update, in place.

    Decoupled weight decay ``theta *= 1 - lr * wd`` is applied before the
    moment update to every tensor except the filter coefficients.
    """
    lr = config.learning_rate if lr is None else lr
    b1, b2, eps = config.beta1, config.beta2, config.eps
    state.step += 1
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    tensors = params.tensors(trainable_only=True)
    for name, g in grads.items():
        theta = tensors[name]
        if config.weight_decay and not name.endswith(".alpha"):
            theta *= 1.0 - lr * config.weight_decay
        m = state.m.setdefault(name, np.zeros_like(theta))
        v = state.v.setdefault(name, np.zeros_like(theta))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def _logits(params, graphs, chunk=256):
    out = []
    for start in range(0, len(graphs), chunk):
        b = batch_graphs(graphs[start : start + chunk])
        out.append(forward_cached(params, b).logits)
    return np.concatenate(out, axis=0)


def evaluate_loss(params, graphs):
    """``(mean cross-entropy, accuracy)`` over a list of graphs."""
    if not graphs:
        raise ConfigError("cannot evaluate on an empty set of graphs")
    logits = _logits(params, graphs)
    labels = np.array([g.label for g in graphs])
    lsm = log_softmax(logits)
    loss = float(-lsm[np.arange(len(graphs)), labels].mean())
    acc = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, acc


def evaluate(params, graphs):
    """Accuracy and confusion matrix (rows: true class, columns: predicted)."""
    if not graphs:
        raise ConfigError("cannot evaluate on an empty set of graphs")
    logits = _logits(params, graphs)
    labels = np.array([g.label for g in graphs])
    pred = np.argmax(logits, axis=1)
    C = params.num_classes
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    return float(np.mean(pred == labels)), confusion


def _improved(acc, loss, best_acc, best_loss):
    return acc > best_acc or (acc == best_acc and loss < best_loss)


def best_epoch(history):
    """Epoch whose parameters ``train`` returns: highest val_acc, then lowest val_loss."""
    best = None
    for rec in history:
        if best is None or _improved(rec["val_acc"], rec["val_loss"], best["val_acc"], best["val_loss"]):
            best = rec
    return None if best is None else best["epoch"]


def train(model_init, dataset_splits, config, on_epoch=None):
    """Mini-batch Adam with early stopping on validation accuracy.

    ``dataset_splits`` is ``(train_graphs, val_graphs)``. Returns the
    best-validation parameters and the per-epoch history records.
    """
    train_graphs, val_graphs = (list(x) for x in dataset_splits)
    if not train_graphs or not val_graphs:
        raise ConfigError("train and validation splits must both be non-empty")
    params = model_init.copy()
    params.gamma = config.gamma
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    lr = config.learning_rate
    best_params = params.copy()
    best_acc, best_loss = -np.inf, np.inf
    stale = 0
    lr_best_loss, lr_stale = np.inf, 0
    history = []
    t0 = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_graphs))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            b = batch_graphs([train_graphs[i] for i in idx])
            _, grads = loss_and_gradients(params, b)
            adam_step(state, params, grads, config, lr)
        train_loss, _ = evaluate_loss(params, train_graphs)
        val_loss, val_acc = evaluate_loss(params, val_graphs)
        rec = {
            "epoch": epoch,
            "train_loss": train_loss,
            "omega": total_omega(params),
            "val_loss": val_loss,
            "val_acc": val_acc,
            "lr": lr,
            "elapsed_s": time.perf_counter() - t0,
        }
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if _improved(val_acc, val_loss, best_acc, best_loss):
            best_acc, best_loss = val_acc, val_loss
            best_params = params.copy()
            stale = 0
        else:
            stale += 1
        if config.lr_decay is not None:
            if val_loss < lr_best_loss:
                lr_best_loss, lr_stale = val_loss, 0
            else:
                lr_stale += 1
                if lr_stale >= config.lr_decay.plateau_patience:
                    lr = max(lr * config.lr_decay.factor, config.lr_decay.min_lr)
                    lr_stale = 0
        if stale >= config.patience:
            logger.info("early stop at epoch %d (best val_acc %.4f)", epoch, best_acc)
            break
    return best_params, history
