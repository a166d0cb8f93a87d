"""Mislabel detection from a trained predicted-gradient run.

For each example the auxiliary network yields a label-free estimate of
the cross-entropy logit gradient; its distance to the actual gradient
collapses algebraically to ||s(r(x)) - y||_2, which ranks examples by how
much the given label disagrees with what the auxiliary (and hence the
input alone) supports. The norm of the predicted gradient itself is also
reported; it separates far less.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import Dataset
from .errors import InputError, ShapeError


@dataclass
class DetectionReport:
    indices: np.ndarray
    noisy_labels: np.ndarray
    clean_labels: np.ndarray | None
    grad_distance: np.ndarray
    mu_norm: np.ndarray
    roc_auc: float | None
    top_suspects: np.ndarray               # global ranking, most suspect first
    top_suspects_per_class: dict[int, list[int]]


def score_examples(classifier: nn.MlpModel, auxiliary: nn.MlpModel,
                   data: Dataset, batch_size: int = 512,
                   distance: str = "l2") -> DetectionReport:
    """Score every example in evaluation mode (no sampling noise).

    grad_distance = ||mu - (s(a)-y)|| = ||s(r(x)) - y||; mu_norm = ||mu||.
    ROC-AUC of grad_distance against the mislabeled flag is filled in when
    the dataset carries clean labels.
    """
    if distance not in ("l2", "l1"):
        raise InputError(f"distance must be 'l2' or 'l1', got {distance!r}")
    if auxiliary.layer_dims[0] != data.inputs.shape[1]:
        raise ShapeError(
            f"auxiliary input dim {auxiliary.layer_dims[0]} != data dim {data.inputs.shape[1]}"
        )
    if auxiliary.output_dim != data.k:
        raise ShapeError(f"auxiliary output dim {auxiliary.output_dim} != k={data.k}")
    n = data.n
    grad_distance = np.empty(n)
    mu_norm = np.empty(n)
    onehot = nn.onehot(data.labels, data.k)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        aux_probs = nn.forward(auxiliary, data.inputs[start:stop]).probs
        cls_probs = nn.forward(classifier, data.inputs[start:stop]).probs
        diff = aux_probs - onehot[start:stop]
        mu = cls_probs - aux_probs
        if distance == "l2":
            grad_distance[start:stop] = np.sqrt((diff * diff).sum(axis=1))
        else:
            grad_distance[start:stop] = np.abs(diff).sum(axis=1)
        mu_norm[start:stop] = np.sqrt((mu * mu).sum(axis=1))

    auc = None
    if data.clean_labels is not None:
        flags = data.labels != data.clean_labels
        if flags.any() and not flags.all():
            auc = roc_auc(grad_distance, flags)

    order = np.argsort(-grad_distance, kind="stable")
    per_class: dict[int, list[int]] = {}
    for idx in order:
        per_class.setdefault(int(data.labels[idx]), []).append(int(idx))
    return DetectionReport(
        indices=np.arange(n),
        noisy_labels=data.labels.copy(),
        clean_labels=None if data.clean_labels is None else data.clean_labels.copy(),
        grad_distance=grad_distance,
        mu_norm=mu_norm,
        roc_auc=auc,
        top_suspects=order,
        top_suspects_per_class=per_class,
    )


def roc_auc(scores, is_positive) -> float:
    """Probability a random positive outscores a random negative, ties
    counted half (the normalized Mann-Whitney U statistic)."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(is_positive, dtype=bool)
    if s.shape != pos.shape or s.ndim != 1:
        raise InputError("scores and flags must be equal-length vectors")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("need at least one positive and one negative")
    ranks = _average_ranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def histogram(values, n_bins: int):
    """Equal-width bins over [min, max]; returns (edges, counts)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise InputError("cannot histogram an empty input")
    if n_bins < 1:
        raise InputError(f"need at least one bin, got {n_bins}")
    counts, edges = np.histogram(v, bins=n_bins)
    return edges, counts
