"""Central finite-difference oracle for gradient tests."""

import numpy as np


def numerical_model_grads(loss_fn, model, h=1e-5):
    """Central differences of loss_fn(model) wrt every parameter entry."""
    grads_w = [np.zeros_like(w) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]
    for arrays, outs in ((model.weights, grads_w), (model.biases, grads_b)):
        for arr, out in zip(arrays, outs):
            flat, out_flat = arr.reshape(-1), out.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_fn(model)
                flat[i] = orig - h
                down = loss_fn(model)
                flat[i] = orig
                out_flat[i] = (up - down) / (2.0 * h)
    return grads_w, grads_b


def rel_error(analytic_w, analytic_b, numeric_w, numeric_b):
    """Worst per-array max-abs error relative to the numeric gradient scale."""
    worst = 0.0
    for a, n in zip(analytic_w + analytic_b, numeric_w + numeric_b):
        scale = max(np.abs(n).max(), 1e-12)
        worst = max(worst, np.abs(a - n).max() / scale)
    return worst


def numerical_array_grad(loss_fn, arr, h=1e-5):
    """Central differences of loss_fn() wrt entries of arr (edited in place)."""
    out = np.zeros_like(arr)
    flat, out_flat = arr.reshape(-1), out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        out_flat[i] = (up - down) / (2.0 * h)
    return out
