"""Graph classifier: stacked bank layers, mean/max readout, linear head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bankgcn import kernels
from bankgcn.errors import DimensionError
from bankgcn.graph import Batch
from bankgcn.layer import (
    PER_SUBSPACE,
    BankLayerParams,
    bank_forward_cached,
    bank_layer_param_count,
    diversity_penalty,
    init_bank_layer,
)

DEFAULT_WIDTHS = (64, 64, 64, 64)
LOWPASS_ALPHA = (1.0, -1.0)


@dataclass(eq=False)
class ModelParams:
    """Full trainable parameter set plus the regularization weight.

    ``frozen_filters`` marks every ``alpha`` as fixed (the low-pass
    baseline); frozen coefficients receive no updates and are not counted
    as trainable.
    """

    layers: list
    head_W: np.ndarray
    head_b: np.ndarray
    gamma: float = 0.0
    frozen_filters: bool = False

    def __post_init__(self):
        self.head_W = np.ascontiguousarray(self.head_W, dtype=np.float64)
        self.head_b = np.ascontiguousarray(self.head_b, dtype=np.float64).ravel()
        for a, b in zip(self.layers, self.layers[1:]):
            if a.d_out != b.d_in:
                raise DimensionError(f"layer widths do not chain: {a.d_out} -> {b.d_in}")
        if self.head_W.shape != (self.readout_width, self.num_classes):
            raise DimensionError(
                f"head_W has shape {self.head_W.shape}, expected ({self.readout_width}, {self.num_classes})"
            )
        if self.head_b.shape != (self.num_classes,):
            raise DimensionError("head_b length must equal the number of classes")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def num_classes(self):
        return self.head_b.shape[0]

    @property
    def readout_width(self):
        return sum(2 * layer.d_out for layer in self.layers)

    @property
    def d_in(self):
        return self.layers[0].d_in if self.layers else None

    def tensors(self, trainable_only=False):
        """Ordered name -> array map (arrays are the live storage, not copies)."""
        out = {}
        for l, layer in enumerate(self.layers):
            out[f"layer{l}.W"] = layer.W
            out[f"layer{l}.b"] = layer.b
            if not (trainable_only and self.frozen_filters):
                out[f"layer{l}.alpha"] = layer.alpha
        out["head.W"] = self.head_W
        out["head.b"] = self.head_b
        return out

    def copy(self):
        return ModelParams(
            [layer.copy() for layer in self.layers],
            self.head_W.copy(),
            self.head_b.copy(),
            self.gamma,
            self.frozen_filters,
        )


def init_model(d_in, num_classes, widths=DEFAULT_WIDTHS, s=8, K=2, gamma=0.0, seed=0, frozen_lowpass=False):
    """Randomly initialized classifier.

    ``frozen_lowpass`` builds the single-filter baseline: ``s = 1`` and
    every alpha pinned to ``(1, -1, 0, ...)``, i.e. response ``2 - lambda``.
    """
    rng = np.random.default_rng(seed)
    layers = []
    width_in = d_in
    for w in widths:
        layer = init_bank_layer(width_in, w, 1 if frozen_lowpass else s, K, rng)
        if frozen_lowpass:
            alpha = np.zeros((layer.s, K + 1))
            alpha[:, : min(2, K + 1)] = LOWPASS_ALPHA[: min(2, K + 1)]
            layer = BankLayerParams(layer.W, layer.b, alpha)
        layers.append(layer)
        width_in = w
    readout = sum(2 * w for w in widths)
    bound = np.sqrt(6.0 / (readout + num_classes))
    head_W = rng.uniform(-bound, bound, size=(readout, num_classes))
    return ModelParams(layers, head_W, np.zeros(num_classes), gamma, frozen_lowpass)


@dataclass(frozen=True, eq=False)
class Prediction:
    """Per-graph outputs of the classifier; row ``i`` belongs to graph ``i``."""

    logits: np.ndarray
    probabilities: np.ndarray = field(init=False)
    predicted_class: np.ndarray = field(init=False)

    def __post_init__(self):
        shifted = self.logits - self.logits.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        object.__setattr__(self, "probabilities", e / e.sum(axis=-1, keepdims=True))
        object.__setattr__(self, "predicted_class", np.argmax(self.logits, axis=-1))


def readout(layer_outputs, b):
    """Concatenate node-wise mean and max of every layer's output, per graph."""
    return readout_cached(layer_outputs, b)[0]


def readout_cached(layer_outputs, b):
    offsets = b.offsets
    counts = np.diff(offsets).astype(np.float64)
    parts, argmaxes = [], []
    for X in layer_outputs:
        if X.shape[0] != offsets[-1]:
            raise DimensionError(f"layer output has {X.shape[0]} rows, batch has {offsets[-1]} nodes")
        mean = np.add.reduceat(X, offsets[:-1], axis=0) / counts[:, None]
        mx, arg = kernels.segment_max(X, offsets)
        parts += [mean, mx]
        argmaxes.append(arg)
    if not parts:
        return np.zeros((len(counts), 0)), argmaxes
    return np.concatenate(parts, axis=1), argmaxes


def readout_backward(dh, layer_shapes, b, argmaxes):
    """Split ``d h_G`` back onto every layer's node features."""
    counts = np.diff(b.offsets).astype(np.float64)
    gon = b.graph_of_node
    grads = []
    col = 0
    for (n, w), arg in zip(layer_shapes, argmaxes):
        dmean = dh[:, col : col + w]
        dmax = dh[:, col + w : col + 2 * w]
        col += 2 * w
        dX = (dmean / counts[:, None])[gon]
        cols = np.broadcast_to(np.arange(w), arg.shape)
        np.add.at(dX, (arg, cols), dmax)
        grads.append(dX)
    return grads


@dataclass
class ForwardCache:
    layer_caches: list
    layer_outputs: list
    argmaxes: list
    h: np.ndarray
    logits: np.ndarray


def forward_cached(params, b):
    X = b.merged.features
    if params.layers and X.shape[1] != params.d_in:
        raise DimensionError(f"batch feature width {X.shape[1]} != model input width {params.d_in}")
    caches, outputs = [], []
    for layer in params.layers:
        X, cache = bank_forward_cached(layer, b, X)
        caches.append(cache)
        outputs.append(X)
    h, argmaxes = readout_cached(outputs, b)
    logits = h @ params.head_W + params.head_b
    return ForwardCache(caches, outputs, argmaxes, h, logits)


def model_forward(params, b):
    """Predictions for every graph in the batch."""
    if not isinstance(b, Batch):
        raise TypeError("model_forward expects a Batch; use batch_graphs([...])")
    return Prediction(forward_cached(params, b).logits)


def log_softmax(logits):
    logits = np.atleast_2d(logits)
    m = logits.max(axis=1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=1, keepdims=True))


def cross_entropy(pred, labels):
    """``-log p[label]`` per graph via log-sum-exp.

    ``pred`` may be a Prediction or raw logits; returns a float for a single
    graph and an array otherwise.
    """
    logits = pred.logits if isinstance(pred, Prediction) else np.asarray(pred, dtype=np.float64)
    single = logits.ndim == 1
    lsm = log_softmax(logits)
    labels = np.atleast_1d(np.asarray(labels))
    C = lsm.shape[1]
    if labels.shape[0] != lsm.shape[0] or np.any(labels < 0) or np.any(labels >= C):
        raise ValueError(f"labels must be integers in [0, {C}) with one per graph")
    out = -lsm[np.arange(lsm.shape[0]), labels.astype(np.int64)]
    return float(out[0]) if single else out


def total_omega(params):
    return float(sum(diversity_penalty(layer.alpha) for layer in params.layers))


def objective(params, b):
    """``(total, loss, omega)`` with ``total = mean CE + gamma * sum_l Omega_l``."""
    pred = model_forward(params, b)
    loss = float(np.mean(cross_entropy(pred, b.labels)))
    omega = total_omega(params)
    return loss + params.gamma * omega, loss, omega


def model_param_count(params, convention=PER_SUBSPACE):
    """Trainable parameters: bank layers (per ``convention``) plus the head."""
    total = sum(bank_layer_param_count(layer, convention, params.frozen_filters) for layer in params.layers)
    return total + params.head_W.size + params.head_b.size
