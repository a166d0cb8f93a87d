"""Information-theoretic lower bounds on training error and the
channel-capacity cap on per-step label information in gradients.

All quantities are in bits. The error bound solves, for the smallest
feasible rate r0,

    r * log2(k-1) + H2(r) >= H(y|x) - budget          (k > 2)
    H2(r) >= H(y|x) - budget                          (k = 2)

by monotone bisection; the left side is strictly increasing on
[0, (k-1)/k] (respectively [0, 1/2]), where its maximum equals log2(k).
Any training run whose weights retain at most ``budget`` bits of label
information per sample must make at least r0 training errors on average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .noise import binary_entropy_bits

_MAX_BISECT = 200


@dataclass(frozen=True)
class BoundQuery:
    h_y_given_x: float  # bits per sample
    info_budget: float  # bits per sample retained in the weights
    k: int

    def __post_init__(self):
        if self.h_y_given_x < 0:
            raise InputError(f"conditional entropy must be >= 0, got {self.h_y_given_x}")
        if self.info_budget < 0:
            raise InputError(f"information budget must be >= 0, got {self.info_budget}")
        if self.k < 2:
            raise InputError(f"class count must be >= 2, got {self.k}")


@dataclass(frozen=True)
class BoundResult:
    r0: float
    solver_iterations: int
    residual: float


def fano_error_lower_bound(query: BoundQuery, tol: float = 1e-6) -> BoundResult:
    """Smallest training-error rate consistent with the entropy/budget pair.

    Returns r0 = 0 when the budget covers the entropy. An infeasible
    right-hand side (impossible for valid noise entropies, which never
    exceed log2(k)) returns the domain endpoint with a negative residual
    as the flag.
    """
    if tol <= 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    k = query.k
    rhs = query.h_y_given_x - query.info_budget
    if rhs <= 0:
        return BoundResult(0.0, 0, 0.0)

    log_k1 = math.log2(k - 1) if k > 2 else 0.0

    def lhs(r: float) -> float:
        return r * log_k1 + binary_entropy_bits(r)

    r_max = (k - 1) / k if k > 2 else 0.5
    top = lhs(r_max)
    if rhs > top:
        return BoundResult(r_max, 0, top - rhs)

    lo, hi = 0.0, r_max
    iterations = 0
    while iterations < _MAX_BISECT:
        if hi - lo <= tol and lhs(hi) - rhs <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lhs(mid) >= rhs:
            hi = mid
        else:
            lo = mid
        iterations += 1
    return BoundResult(hi, iterations, lhs(hi) - rhs)


def capacity_bound_bits(d: int, L2: float, sigma_q: float) -> float:
    """(d/2) * log2(1 + L2 / (d * sigma_q^2)): the most label information a
    d-dimensional gradient with mean power L2 can carry through additive
    noise of per-coordinate variance sigma_q^2."""
    if d < 1:
        raise InputError(f"dimension must be >= 1, got {d}")
    if L2 < 0:
        raise InputError(f"squared norm must be >= 0, got {L2}")
    if sigma_q <= 0:
        raise InputError(f"noise scale must be positive, got {sigma_q}")
    return 0.5 * d * math.log1p(L2 / (d * sigma_q * sigma_q)) / math.log(2.0)


def per_step_budget(mu_batch: np.ndarray, sigma_q: float) -> float:
    """Capacity bound for one optimizer step, using the measured squared
    norm of the predicted batch gradient. Summing over steps bounds the
    label information the whole run can have moved into the weights."""
    mu = np.asarray(mu_batch, dtype=np.float64)
    flat = mu.reshape(-1)
    return capacity_bound_bits(flat.size, float(flat @ flat), sigma_q)
