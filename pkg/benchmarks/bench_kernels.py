"""Timing comparison of the numba and pure-numpy kernel backends.

Run:  python benchmarks/bench_kernels.py  [--repeats N]

Covers the fused elementwise kernels plus a composite forward/backward/
Adam training step at the reference network size. Matrix products go
through BLAS in both backends, so the composite speedup is bounded by the
elementwise share of the step.
"""

import argparse
import time

import numpy as np

from limitlab import kernels, nn, training


def _time(fn, repeats: int) -> float:
    fn()  # warm up (JIT compile / cache touch)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_elementwise(kset, repeats):
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((128, 10))
    pre = rng.standard_normal((128, 512))
    delta = rng.standard_normal((128, 512))
    param = rng.standard_normal(1_200_000)
    grad = rng.standard_normal(1_200_000)
    m = np.zeros_like(param)
    v = np.zeros_like(param)

    times = {}
    times["softmax_rows 128x10"] = _time(lambda: kset["softmax_rows"](logits), repeats)
    times["relu 128x512"] = _time(lambda: kset["relu"](pre), repeats)
    times["relu_backward 128x512"] = _time(
        lambda: kset["relu_backward"](delta.copy(), pre), repeats
    )
    times["adam_update 1.2M"] = _time(
        lambda: kset["adam_update"](param, grad, m, v, 5, 1e-3, 0.9, 0.999, 1e-8),
        repeats,
    )
    return times


def bench_train_step(repeats):
    """One full ce step at the reference size, using the active backend."""
    rng = np.random.default_rng(1)
    inputs = rng.standard_normal((128, 784))
    labels = rng.integers(0, 10, 128)
    onehot = nn.onehot(labels, 10)
    config = training.TrainConfig(method="ce", hidden=(512, 512, 512, 512),
                                  sigma_xi=0.0, epochs=1)
    run = training.new_run(784, 10, config)
    rng_m = np.random.default_rng(2)
    return _time(lambda: training.train_step(run, inputs, onehot, rng_m), repeats)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    numpy_k = kernels.numpy_kernels()
    try:
        numba_k = kernels.numba_kernels()
    except ImportError:
        numba_k = None

    print(f"active backend: {kernels.BACKEND}")
    np_times = bench_elementwise(numpy_k, args.repeats)
    nb_times = bench_elementwise(numba_k, args.repeats) if numba_k else {}

    width = max(len(k) for k in np_times)
    print(f"\n{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, t_np in np_times.items():
        if nb_times:
            t_nb = nb_times[name]
            print(f"{name:<{width}}  {t_np*1e6:>8.1f}us  {t_nb*1e6:>8.1f}us  {t_np/t_nb:>7.2f}x")
        else:
            print(f"{name:<{width}}  {t_np*1e6:>8.1f}us  {'-':>10}  {'-':>8}")

    step = bench_train_step(max(args.repeats // 2, 3))
    print(f"\nfull ce train step (4x512, batch 128, {kernels.BACKEND} backend): "
          f"{step*1e3:.2f} ms")
    print("re-run with LIMITLAB_BACKEND=numpy or =numba to compare the composite step")


if __name__ == "__main__":
    main()
