"""Adam, the unified training loop, and the training methods.

Methods:
  ce       cross-entropy on the (possibly noisy) labels
  mae      L1 loss between one-hot labels and softmax outputs
  ce_gn    cross-entropy with Gaussian noise added to the logit gradient
  ce_ln    cross-entropy with Laplace noise added to the logit gradient
  soft_reg cross-entropy plus an activation-norm penalty that rewards the
           labels being predictable by a label-blind auxiliary network
  limit    the classifier is updated ONLY with gradients predicted by the
           auxiliary network from the inputs; the auxiliary is fit to the
           true cross-entropy logit gradients under an L2 capacity penalty
           beta*||mu||^2. The classifier path never touches labels.

Model selection picks the epoch with the best accuracy on a validation
set that follows the same noise model as training; test accuracy is
reported on clean labels at that checkpoint. Every run is bitwise
deterministic given its seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds, kernels, nn
from .data import Dataset
from .errors import ConfigError, InputError, ShapeError

METHODS = ("ce", "mae", "ce_gn", "ce_ln", "soft_reg", "limit")
DISTRIBUTIONS = ("gaussian", "laplace")

# sweep grids honored by the sweep driver
BETA_GRID = (0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)
SIGMA_Q_GRID = (0.01, 0.03, 0.1, 0.3)
SOFT_REG_LAMBDA_GRID = (0.001, 0.01, 0.03, 0.1)
SOFT_REG_BETA_GRID = (0.0, 0.01, 0.1, 1.0, 10.0)

_MASK64 = (1 << 64) - 1


def splitmix64(state: int):
    """Yield an endless deterministic stream of 64-bit values."""
    state &= _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def derive_seeds(global_seed: int) -> tuple[int, int, int]:
    """Expand one seed into (init, shuffle, method-noise) sub-seeds."""
    stream = splitmix64(global_seed)
    return next(stream), next(stream), next(stream)


def _aux_init_seed(seed_init: int) -> int:
    return next(splitmix64(seed_init))


@dataclass(frozen=True)
class TrainConfig:
    method: str = "ce"
    hidden: tuple[int, ...] = (512, 512, 512, 512)
    dist: str = "gaussian"          # limit: q parameterization
    sample_g: bool = False          # limit: sample g_t instead of using mu
    init_from_ce: bool = False      # limit: warm-start both nets from best CE
    lam: float = 1.0                # soft_reg weight (fixed 1 for limit)
    beta: float = 0.0               # capacity penalty on predicted gradients
    sigma_q: float = 0.1
    sigma_xi: float = 1e-9
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    epochs: int = 400
    patience: int = 100
    seed_init: int = 0
    seed_shuffle: int = 1
    seed_method: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.dist not in DISTRIBUTIONS:
            raise ConfigError(f"dist must be one of {DISTRIBUTIONS}, got {self.dist!r}")
        if self.sigma_q < 0:
            raise ConfigError(f"sigma_q must be >= 0, got {self.sigma_q}")
        if self.method == "limit" and self.sigma_q <= 0:
            raise ConfigError("limit requires sigma_q > 0 (capacity accounting)")
        if self.sigma_xi < 0 or self.beta < 0 or self.lr <= 0:
            raise ConfigError("sigma_xi and beta must be >= 0, lr > 0")
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, epochs and patience must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden dims must be positive, got {self.hidden}")

    @property
    def needs_auxiliary(self) -> bool:
        return self.method in ("limit", "soft_reg")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def init_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr, beta1, beta2, eps):
    """One bias-corrected Adam update, in place. Returns (params, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and state must have equal lengths")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ShapeError(f"grad shape {np.shape(g)} != param shape {p.shape}")
    state.t += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        kernels.adam_update(p, g, m, v, state.t, lr, beta1, beta2, eps)
    return params, state


@dataclass
class TrainRun:
    """Live state of one run plus its per-epoch metrics."""

    classifier: nn.MlpModel
    auxiliary: nn.MlpModel | None
    opt_classifier: AdamState
    opt_auxiliary: AdamState | None
    config: TrainConfig
    info_budget_bits: float = 0.0
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    budget_bits: list[float] = field(default_factory=list)  # cumulative per epoch
    best_epoch: int = -1
    best_val_acc: float = -math.inf
    best_classifier: nn.MlpModel | None = None
    best_auxiliary: nn.MlpModel | None = None

    @property
    def n_epochs_run(self) -> int:
        return len(self.train_acc)


def new_run(input_dim: int, k: int, config: TrainConfig,
            warm_start: nn.MlpModel | None = None) -> TrainRun:
    dims = [input_dim, *config.hidden, k]
    if warm_start is not None:
        if list(warm_start.layer_dims) != dims:
            raise ConfigError(
                f"warm start dims {warm_start.layer_dims} do not match {dims}"
            )
        classifier = warm_start.copy()
        auxiliary = warm_start.copy() if config.needs_auxiliary else None
    else:
        classifier = nn.init_model(dims, config.seed_init)
        auxiliary = (
            nn.init_model(dims, _aux_init_seed(config.seed_init))
            if config.needs_auxiliary else None
        )
    return TrainRun(
        classifier=classifier,
        auxiliary=auxiliary,
        opt_classifier=AdamState.init_like(classifier.parameters()),
        opt_auxiliary=AdamState.init_like(auxiliary.parameters()) if auxiliary else None,
        config=config,
    )


# ---------------------------------------------------------------------------
# per-method logit gradients and steps


def ce_logit_update_grad(trace: nn.ForwardTrace, onehot_labels, config: TrainConfig,
                         rng: np.random.Generator) -> np.ndarray:
    """Per-sample logit gradient for the four loss-based methods."""
    if config.method == "mae":
        return nn.mae_logit_grad(trace, onehot_labels)
    g = nn.softmax_ce_logit_grad(trace, onehot_labels)
    if config.method == "ce":
        if config.sigma_xi > 0:
            g = g + rng.normal(0.0, config.sigma_xi, size=g.shape)
        return g
    if config.method == "ce_gn":
        return g + rng.normal(0.0, config.sigma_q, size=g.shape)
    if config.method == "ce_ln":
        return g + rng.laplace(0.0, config.sigma_q / math.sqrt(2.0), size=g.shape)
    raise ConfigError(f"method {config.method!r} has no plain logit gradient")


def limit_predict_mu(aux: nn.MlpModel, trace_of_classifier: nn.ForwardTrace,
                     inputs: np.ndarray) -> np.ndarray:
    """Predicted mean logit gradient mu = s(a) - s(r(x)); rows sum to zero."""
    if aux.output_dim != trace_of_classifier.logits.shape[1]:
        raise ShapeError(
            f"auxiliary output dim {aux.output_dim} != class count "
            f"{trace_of_classifier.logits.shape[1]}"
        )
    aux_trace = nn.forward(aux, inputs)
    return trace_of_classifier.probs - aux_trace.probs


def _softmax_jacobian_vp(probs: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Row-wise product of the softmax Jacobian with a vector:
    J v = s * (v - <s, v>)."""
    return probs * (vec - (probs * vec).sum(axis=1, keepdims=True))


def limit_phi_loss(aux: nn.MlpModel, inputs, classifier_probs, target_grad,
                   beta: float, dist: str) -> float:
    """Batch-mean auxiliary objective: prediction error against the true
    logit gradient plus the capacity penalty beta*||mu||^2."""
    aux_trace = nn.forward(aux, inputs)
    mu = classifier_probs - aux_trace.probs
    diff = mu - target_grad
    if dist == "gaussian":
        per_sample = (diff * diff).sum(axis=1)
    else:
        per_sample = np.abs(diff).sum(axis=1)
    per_sample = per_sample + beta * (mu * mu).sum(axis=1)
    return float(per_sample.mean())


def limit_aux_grads(aux: nn.MlpModel, aux_trace: nn.ForwardTrace, classifier_probs,
                    target_grad, beta: float, dist: str):
    """Parameter gradients of limit_phi_loss, with the classifier's
    probabilities treated as constants."""
    mu = classifier_probs - aux_trace.probs
    if dist == "gaussian":
        d_mu = 2.0 * (mu - target_grad) + 2.0 * beta * mu
    else:
        d_mu = np.sign(mu - target_grad) + 2.0 * beta * mu
    aux_logit_grad = -_softmax_jacobian_vp(aux_trace.probs, d_mu)
    return nn.backprop_from_logits(aux, aux_trace, aux_logit_grad)


def limit_step(run: TrainRun, inputs, onehot_labels, rng: np.random.Generator) -> TrainRun:
    """One predicted-gradient step: the classifier is updated from mu
    (plus sampled noise when enabled) and never sees the labels; the
    auxiliary is fit to the noisy cross-entropy gradient."""
    cfg = run.config
    if run.auxiliary is None:
        raise ConfigError("limit training requires an auxiliary model")
    trace = nn.forward(run.classifier, inputs)
    target = nn.softmax_ce_logit_grad(trace, onehot_labels)
    if cfg.sigma_xi > 0:
        target = target + rng.normal(0.0, cfg.sigma_xi, size=target.shape)
    aux_trace = nn.forward(run.auxiliary, inputs)
    mu = trace.probs - aux_trace.probs

    if cfg.sample_g:
        if cfg.dist == "gaussian":
            g_t = mu + rng.normal(0.0, cfg.sigma_q, size=mu.shape)
        else:
            g_t = mu + rng.laplace(0.0, cfg.sigma_q / math.sqrt(2.0), size=mu.shape)
    else:
        g_t = mu

    wgrads, bgrads = nn.backprop_from_logits(run.classifier, trace, g_t)
    adam_step(run.classifier.parameters(), nn.grads_as_parameter_list(wgrads, bgrads),
              run.opt_classifier, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    awgrads, abgrads = limit_aux_grads(run.auxiliary, aux_trace, trace.probs,
                                       target, cfg.beta, cfg.dist)
    adam_step(run.auxiliary.parameters(), nn.grads_as_parameter_list(awgrads, abgrads),
              run.opt_auxiliary, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    run.info_budget_bits += bounds.per_step_budget(mu, cfg.sigma_q)
    return run


def soft_reg_loss(classifier: nn.MlpModel, aux: nn.MlpModel, inputs, labels,
                  onehot_labels, lam: float, beta: float = 0.0) -> float:
    """Full soft-regularizer objective (batch mean):
    CE + lam*||z||^2*||y - s_r||^2 + beta*||z||^2*||s(a) - s_r||^2."""
    trace = nn.forward(classifier, inputs)
    aux_trace = nn.forward(aux, inputs)
    z_sq = (trace.penultimate ** 2).sum(axis=1)
    resid = onehot_labels - aux_trace.probs
    value = nn.ce_loss_mean(trace, labels) + lam * float(
        (z_sq * (resid * resid).sum(axis=1)).mean()
    )
    if beta:
        mu = trace.probs - aux_trace.probs
        value += beta * float((z_sq * (mu * mu).sum(axis=1)).mean())
    return value


def soft_reg_step(run: TrainRun, inputs, onehot_labels, rng: np.random.Generator) -> TrainRun:
    """Joint step on the classifier (cross-entropy plus the penalty's
    pull on ||z||) and on the auxiliary (matching y, beta-penalized)."""
    cfg = run.config
    if run.auxiliary is None:
        raise ConfigError("soft_reg training requires an auxiliary model")
    trace = nn.forward(run.classifier, inputs)
    ce_grad = nn.softmax_ce_logit_grad(trace, onehot_labels)
    logit_grad = ce_grad
    if cfg.sigma_xi > 0:
        logit_grad = logit_grad + rng.normal(0.0, cfg.sigma_xi, size=ce_grad.shape)
    aux_trace = nn.forward(run.auxiliary, inputs)
    resid = onehot_labels - aux_trace.probs
    c = (resid * resid).sum(axis=1, keepdims=True)
    z = trace.penultimate
    extra = (2.0 * cfg.lam) * c * z

    wgrads, bgrads = nn.backprop_from_logits(run.classifier, trace, logit_grad,
                                             extra_penultimate_grad=extra)
    adam_step(run.classifier.parameters(), nn.grads_as_parameter_list(wgrads, bgrads),
              run.opt_classifier, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    z_sq = (z * z).sum(axis=1, keepdims=True)
    d_probs = (-2.0 * cfg.lam) * z_sq * resid
    if cfg.beta:
        d_probs = d_probs - (2.0 * cfg.beta) * z_sq * (trace.probs - aux_trace.probs)
    aux_logit_grad = _softmax_jacobian_vp(aux_trace.probs, d_probs)
    awgrads, abgrads = nn.backprop_from_logits(run.auxiliary, aux_trace, aux_logit_grad)
    adam_step(run.auxiliary.parameters(), nn.grads_as_parameter_list(awgrads, abgrads),
              run.opt_auxiliary, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    run.info_budget_bits += _plain_channel_budget(ce_grad, cfg.sigma_xi)
    return run


def _plain_channel_budget(label_grad: np.ndarray, sigma: float) -> float:
    """Capacity of the label-dependent gradient through its additive-noise
    channel; vacuous (infinite) when no noise is injected."""
    if sigma <= 0:
        return math.inf
    return bounds.per_step_budget(label_grad, sigma)


def _loss_method_step(run: TrainRun, inputs, onehot_labels, rng) -> TrainRun:
    cfg = run.config
    trace = nn.forward(run.classifier, inputs)
    g = ce_logit_update_grad(trace, onehot_labels, cfg, rng)
    wgrads, bgrads = nn.backprop_from_logits(run.classifier, trace, g)
    adam_step(run.classifier.parameters(), nn.grads_as_parameter_list(wgrads, bgrads),
              run.opt_classifier, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    if cfg.method in ("ce_gn", "ce_ln"):
        label_grad = nn.softmax_ce_logit_grad(trace, onehot_labels)
        run.info_budget_bits += _plain_channel_budget(label_grad, cfg.sigma_q)
    else:
        label_grad = g if cfg.method == "mae" else nn.softmax_ce_logit_grad(trace, onehot_labels)
        run.info_budget_bits += _plain_channel_budget(label_grad, cfg.sigma_xi)
    return run


def train_step(run: TrainRun, inputs, onehot_labels, rng) -> TrainRun:
    if run.config.method == "limit":
        return limit_step(run, inputs, onehot_labels, rng)
    if run.config.method == "soft_reg":
        return soft_reg_step(run, inputs, onehot_labels, rng)
    return _loss_method_step(run, inputs, onehot_labels, rng)


# ---------------------------------------------------------------------------
# evaluation and the training loop


def evaluate(model: nn.MlpModel, data: Dataset, batch_size: int = 512,
             use_clean: bool = False) -> tuple[float, float]:
    """(accuracy, mean CE loss in nats) against noisy or clean labels."""
    labels = data.clean_labels if use_clean and data.clean_labels is not None else data.labels
    correct = 0
    loss_total = 0.0
    for start in range(0, data.n, batch_size):
        stop = min(start + batch_size, data.n)
        trace = nn.forward(model, data.inputs[start:stop])
        pred = trace.logits.argmax(axis=1)
        correct += int((pred == labels[start:stop]).sum())
        loss_total += nn.ce_loss_mean(trace, labels[start:stop]) * (stop - start)
    return correct / data.n, loss_total / data.n


def train(data_train: Dataset, data_val: Dataset, data_test: Dataset,
          config: TrainConfig, warm_start: nn.MlpModel | None = None) -> TrainRun:
    """Run the configured method with deterministic epoch-wise shuffling,
    noisy-validation model selection, and early stopping."""
    for name, split in (("train", data_train), ("val", data_val), ("test", data_test)):
        if split.n == 0:
            raise InputError(f"{name} split is empty")
    k = data_train.k
    d = data_train.inputs.shape[1]

    if config.method == "limit" and config.init_from_ce and warm_start is None:
        ce_config = replace(config, method="ce", init_from_ce=False)
        warm_start = train(data_train, data_val, data_test, ce_config).best_classifier

    run = new_run(d, k, config, warm_start=warm_start)
    rng_shuffle = np.random.Generator(np.random.PCG64(config.seed_shuffle))
    rng_method = np.random.Generator(np.random.PCG64(config.seed_method))
    labels_onehot = nn.onehot(data_train.labels, k)

    epochs_since_best = 0
    for epoch in range(config.epochs):
        order = rng_shuffle.permutation(data_train.n)
        for start in range(0, data_train.n, config.batch_size):
            idx = order[start:start + config.batch_size]
            train_step(run, data_train.inputs[idx], labels_onehot[idx], rng_method)

        tr_acc, tr_loss = evaluate(run.classifier, data_train)
        va_acc, va_loss = evaluate(run.classifier, data_val)
        te_acc, te_loss = evaluate(run.classifier, data_test, use_clean=True)
        run.train_acc.append(tr_acc)
        run.val_acc.append(va_acc)
        run.test_acc.append(te_acc)
        run.train_loss.append(tr_loss)
        run.val_loss.append(va_loss)
        run.test_loss.append(te_loss)
        run.budget_bits.append(run.info_budget_bits)

        if va_acc > run.best_val_acc:
            run.best_val_acc = va_acc
            run.best_epoch = epoch
            run.best_classifier = run.classifier.copy()
            run.best_auxiliary = run.auxiliary.copy() if run.auxiliary else None
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break
    return run
