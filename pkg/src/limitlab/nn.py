"""From-scratch dense MLP: forward pass, losses, and exact reverse-mode
backpropagation with gradient injection at the logits.

Hidden layers use ReLU (subgradient 0 at 0), the output layer is linear.
All arrays are float64. Parameter gradients are means over the batch, so
the learning-rate scale is batch-size independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InputError, NumericError, ShapeError


@dataclass
class MlpModel:
    """Weights of a fully connected network.

    layer_dims = [input, hidden..., output]; weights[l] has shape
    (layer_dims[l], layer_dims[l+1]).
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays, weights interleaved with biases."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class ForwardTrace:
    """Every intermediate of one forward pass, as needed for backprop."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)
    logits: np.ndarray = None
    probs: np.ndarray = None

    @property
    def penultimate(self) -> np.ndarray:
        """Last hidden activation z (the inputs for a one-layer model)."""
        return self.activations[-1] if self.activations else self.inputs


def init_model(layer_dims, seed: int) -> MlpModel:
    """Uniform ±1/sqrt(fan_in) weights, zero biases, deterministic per seed.

    The sub-variance-preserving scale keeps initial logits cold. A
    variance-preserving init (bound sqrt(6/fan_in)) lets optimizer drift
    saturate the softmax of deep stacks within an epoch, which kills the
    softmax Jacobian and freezes predicted-gradient training.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise InputError(f"need at least input and output dims, got {dims}")
    if any(d < 1 for d in dims):
        raise InputError(f"all layer dims must be >= 1, got {dims}")
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def forward(model: MlpModel, batch_inputs: np.ndarray) -> ForwardTrace:
    """Run the network on a (batch, input_dim) array, keeping intermediates."""
    x = np.asarray(batch_inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_dims[0]:
        raise ShapeError(
            f"inputs of shape {x.shape} do not match input dim {model.layer_dims[0]}"
        )
    trace = ForwardTrace(inputs=x)
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        pre = h @ w + b
        trace.pre_activations.append(pre)
        h = kernels.relu(pre)
        trace.activations.append(h)
    trace.logits = h @ model.weights[-1] + model.biases[-1]
    if not np.isfinite(trace.logits).all():
        raise NumericError("non-finite logits in forward pass")
    trace.probs = kernels.softmax_rows(trace.logits)
    return trace


def _check_onehot(onehot: np.ndarray, logits: np.ndarray) -> np.ndarray:
    y = np.asarray(onehot, dtype=np.float64)
    if y.shape != logits.shape:
        raise ShapeError(f"labels {y.shape} do not match logits {logits.shape}")
    if not (np.isin(y, (0.0, 1.0)).all() and (y.sum(axis=1) == 1.0).all()):
        raise InputError("label rows must be exact one-hot vectors")
    return y


def softmax_ce_logit_grad(trace: ForwardTrace, onehot_labels: np.ndarray) -> np.ndarray:
    """Per-sample gradient of cross-entropy (nats) wrt logits: probs - y."""
    y = _check_onehot(onehot_labels, trace.logits)
    return trace.probs - y


def mae_logit_grad(trace: ForwardTrace, onehot_labels: np.ndarray) -> np.ndarray:
    """Per-sample gradient of the L1 loss ||y - probs||_1 wrt logits.

    For one-hot y this is 2 * probs[y] * (probs - y): the update signal is
    suppressed by the model's own confidence on the labeled class.
    """
    y = _check_onehot(onehot_labels, trace.logits)
    p_correct = (trace.probs * y).sum(axis=1, keepdims=True)
    return 2.0 * p_correct * (trace.probs - y)


def backprop_from_logits(
    model: MlpModel,
    trace: ForwardTrace,
    logit_grad: np.ndarray,
    extra_penultimate_grad: np.ndarray | None = None,
):
    """Propagate an injected logit gradient down to all parameters.

    No labels are consulted below the logits. Returns (weight_grads,
    bias_grads), each the batch mean. ``extra_penultimate_grad`` adds a
    per-sample gradient at the last hidden activation z (used by the
    activation-norm regularizer).
    """
    g = np.asarray(logit_grad, dtype=np.float64)
    if g.shape != trace.logits.shape:
        raise ShapeError(f"logit grad {g.shape} does not match logits {trace.logits.shape}")
    n_layers = model.n_layers
    batch = g.shape[0]
    inv_b = 1.0 / batch
    weight_grads = [None] * n_layers
    bias_grads = [None] * n_layers
    delta = g
    for layer in reversed(range(n_layers)):
        below = trace.activations[layer - 1] if layer > 0 else trace.inputs
        weight_grads[layer] = (below.T @ delta) * inv_b
        bias_grads[layer] = delta.sum(axis=0) * inv_b
        if layer > 0:
            delta = delta @ model.weights[layer].T
            if layer == n_layers - 1 and extra_penultimate_grad is not None:
                delta += extra_penultimate_grad
            delta = kernels.relu_backward(delta, trace.pre_activations[layer - 1])
    return weight_grads, bias_grads


def grads_as_parameter_list(weight_grads, bias_grads) -> list[np.ndarray]:
    """Interleave gradients to match MlpModel.parameters() order."""
    out = []
    for gw, gb in zip(weight_grads, bias_grads):
        out.append(gw)
        out.append(gb)
    return out


def ce_loss_mean(trace: ForwardTrace, labels: np.ndarray) -> float:
    """Mean cross-entropy in nats for integer labels, computed stably
    from the logits via log-sum-exp."""
    a = trace.logits
    idx = np.asarray(labels)
    mx = a.max(axis=1)
    lse = mx + np.log(np.exp(a - mx[:, None]).sum(axis=1))
    picked = a[np.arange(a.shape[0]), idx]
    return float(np.mean(lse - picked))


def mae_loss_mean(trace: ForwardTrace, onehot_labels: np.ndarray) -> float:
    """Mean L1 distance between one-hot labels and softmax outputs."""
    y = np.asarray(onehot_labels, dtype=np.float64)
    return float(np.abs(y - trace.probs).sum(axis=1).mean())


def predict(model: MlpModel, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Argmax class predictions, computed in batches."""
    n = inputs.shape[0]
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        trace = forward(model, inputs[start:stop])
        out[start:stop] = trace.logits.argmax(axis=1)
    return out


def onehot(labels: np.ndarray, k: int) -> np.ndarray:
    idx = np.asarray(labels, dtype=np.int64)
    if idx.min() < 0 or idx.max() >= k:
        raise InputError(f"labels outside [0, {k})")
    out = np.zeros((idx.shape[0], k))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out
