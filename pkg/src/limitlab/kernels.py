"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the LIMITLAB_BACKEND
environment variable ("numba" or "numpy"). Unset, it defaults to numba
when importable and falls back to numpy otherwise. Matrix products are
deliberately left to numpy's BLAS in both backends; only the fused
elementwise loops (Adam moment updates, softmax rows, ReLU masks) differ.

Each backend is deterministic run-to-run. The two backends agree to
floating-point roundoff but are not guaranteed bitwise identical
(libm exp vs numpy's vectorized exp may differ in the last ulp).

``benchmarks/bench_kernels.py`` times the two backends side by side.
"""

from __future__ import annotations

import os

import numpy as np


def _requested_backend() -> str:
    choice = os.environ.get("LIMITLAB_BACKEND", "").strip().lower()
    if choice not in ("", "numpy", "numba"):
        raise ValueError(
            f"LIMITLAB_BACKEND must be 'numpy' or 'numba', got {choice!r}"
        )
    if choice:
        return choice
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _requested_backend()


# ---------------------------------------------------------------------------
# numpy reference implementations


def _softmax_rows_np(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction stabilization."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted *= 1.0 / shifted.sum(axis=1, keepdims=True)
    return shifted


def _relu_np(pre: np.ndarray) -> np.ndarray:
    return np.maximum(pre, 0.0)


def _relu_backward_np(delta: np.ndarray, pre: np.ndarray) -> np.ndarray:
    """In-place: zero the entries of delta where pre <= 0. Returns delta."""
    delta *= pre > 0.0
    return delta


def _adam_update_np(param, grad, m, v, t, lr, beta1, beta2, eps):
    """Fused in-place Adam update on flat views (bias-corrected)."""
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def numpy_kernels() -> dict:
    return {
        "softmax_rows": _softmax_rows_np,
        "relu": _relu_np,
        "relu_backward": _relu_backward_np,
        "adam_update": _adam_update_np,
    }


# ---------------------------------------------------------------------------
# numba implementations (compiled lazily, cached on disk)

_numba_cache: dict | None = None


def numba_kernels() -> dict:
    """Compile (once) and return the numba kernel set. Raises ImportError
    when numba is unavailable."""
    global _numba_cache
    if _numba_cache is not None:
        return _numba_cache

    from numba import njit

    @njit(cache=True)
    def softmax_rows(logits):
        n, k = logits.shape
        out = np.empty((n, k))
        for i in range(n):
            mx = logits[i, 0]
            for j in range(1, k):
                if logits[i, j] > mx:
                    mx = logits[i, j]
            total = 0.0
            for j in range(k):
                e = np.exp(logits[i, j] - mx)
                out[i, j] = e
                total += e
            inv = 1.0 / total
            for j in range(k):
                out[i, j] *= inv
        return out

    @njit(cache=True)
    def relu(pre):
        out = np.empty_like(pre)
        flat_in = pre.reshape(-1)
        flat_out = out.reshape(-1)
        for i in range(flat_in.size):
            x = flat_in[i]
            flat_out[i] = x if x > 0.0 else 0.0
        return out

    @njit(cache=True)
    def relu_backward(delta, pre):
        flat_d = delta.reshape(-1)
        flat_p = pre.reshape(-1)
        for i in range(flat_d.size):
            if flat_p[i] <= 0.0:
                flat_d[i] = 0.0
        return delta

    @njit(cache=True)
    def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
        c1 = 1.0 - beta1**t
        c2 = 1.0 - beta2**t
        for i in range(param.size):
            g = grad[i]
            mi = beta1 * m[i] + (1.0 - beta1) * g
            vi = beta2 * v[i] + (1.0 - beta2) * (g * g)
            m[i] = mi
            v[i] = vi
            param[i] -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)

    _numba_cache = {
        "softmax_rows": softmax_rows,
        "relu": relu,
        "relu_backward": relu_backward,
        "adam_update": adam_update,
    }
    return _numba_cache


_active = numba_kernels() if BACKEND == "numba" else numpy_kernels()

softmax_rows = _active["softmax_rows"]
relu = _active["relu"]
relu_backward = _active["relu_backward"]
_adam_update_flat = _active["adam_update"]


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """In-place Adam update of one parameter array of any shape."""
    grad = np.ascontiguousarray(grad)
    _adam_update_flat(
        param.reshape(-1), grad.reshape(-1), m.reshape(-1), v.reshape(-1),
        t, lr, beta1, beta2, eps,
    )
