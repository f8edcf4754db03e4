"""Benchmark the compiled kernel extension against the NumPy fallback.

Runs each hot kernel on training-realistic shapes, then times one epoch of
autoencoder training end-to-end under each backend.  Invoke from the repo
root after installing:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import os
import subprocess
import sys
import time

import numpy as np

from roadslice.nn import _kernels_np as knp

try:
    from roadslice.nn import _kernels as kc
except ImportError:
    kc = None


def timeit(fn, repeat=200):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    rng = np.random.default_rng(0)
    b, g = 64, 128
    pre = rng.normal(size=(b, 4 * g))
    c_prev = rng.normal(size=(b, g))
    h, c, gates = knp.lstm_gates_forward(pre, c_prev)
    gh, gc = rng.normal(size=(b, g)), rng.normal(size=(b, g))

    xp = rng.normal(size=(32, 32, 3, 26, 18))  # second conv layer, padded
    col = knp.im2col3d(xp, 3, 3, 3)
    gcol = rng.normal(size=col.shape)

    n = 128 * 512
    param, grad = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)

    cases = {
        "lstm_gates_forward  (64x128)": lambda k: k.lstm_gates_forward(pre, c_prev),
        "lstm_gates_backward (64x128)": lambda k: k.lstm_gates_backward(gh, gc, gates, c_prev, c),
        "im2col3d   (32,32,3,26,18)": lambda k: k.im2col3d(xp, 3, 3, 3),
        "col2im3d   (32,32,3,26,18)": lambda k: k.col2im3d(gcol, 32, 3, 26, 18, 3, 3, 3),
        "adam_update      (65k par)": lambda k: k.adam_update(
            param, grad, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
    }
    print(f"{'kernel':<30} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for name, fn in cases.items():
        repeat = 50 if "col" in name else 300
        t_np = timeit(lambda: fn(knp), repeat)
        if kc is None:
            print(f"{name:<30} {t_np * 1e6:>8.0f}us {'n/a':>10} {'-':>8}")
            continue
        t_c = timeit(lambda: fn(kc), repeat)
        print(f"{name:<30} {t_np * 1e6:>8.0f}us {t_c * 1e6:>8.0f}us "
              f"{t_np / t_c:>7.2f}x")


def bench_training_epoch(backend: str) -> float:
    """One autoencoder epoch on synthetic windows, in a subprocess so the
    backend choice is made at import time."""
    code = (
        "import time, numpy as np\n"
        "from roadslice.anomaly import AeTrainConfig, train_autoencoder\n"
        "rng = np.random.default_rng(0)\n"
        "xs = rng.uniform(size=(512, 16, 24))\n"
        "t0 = time.perf_counter()\n"
        "train_autoencoder('m', xs, AeTrainConfig(epochs=1, batch_size=32,"
        " seed=0, val_fraction=0.0))\n"
        "print(time.perf_counter() - t0)\n"
    )
    env = dict(os.environ, ROADSLICE_KERNELS=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    print(f"compiled extension available: {kc is not None}\n")
    bench_kernels()
    print("\nend-to-end: one autoencoder epoch (512 windows of 16x24)")
    t_py = bench_training_epoch("python")
    print(f"  numpy backend:    {t_py:6.2f}s")
    if kc is not None:
        t_c = bench_training_epoch("compiled")
        print(f"  compiled backend: {t_c:6.2f}s  ({t_py / t_c:.2f}x)")


if __name__ == "__main__":
    main()
