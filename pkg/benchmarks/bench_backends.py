"""Timing comparison of the numpy and numba kernel backends.

Runs each workload under both backends (when numba is installed) after a
JIT warmup and prints a small table. Results are bitwise-identical
across backends by construction; this script only measures speed.

Usage: python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np

from affectmap import _kernels
from affectmap.models import FfnnConfig, KnnModel, train_ffnn_arrays


def bench(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def ffnn_training():
    rng = np.random.default_rng(0)
    S = rng.uniform(1.0, 9.0, size=(1000, 3))
    M = rng.uniform(-0.3, 0.3, size=(5, 3))
    T = 3.0 + (S - 5.0) @ M.T
    cfg = FfnnConfig(iterations=300, seed=0)
    return lambda: train_ffnn_arrays(cfg, S, T)


def knn_prediction():
    rng = np.random.default_rng(1)
    S = rng.uniform(1.0, 9.0, size=(5000, 3))
    T = rng.uniform(1.0, 5.0, size=(5000, 5))
    X = rng.uniform(1.0, 9.0, size=(2000, 3))
    model = KnnModel(k=20).fit_arrays(S, T)
    return lambda: model.predict(X)


def dropout_forward():
    rng = np.random.default_rng(2)
    zlin = rng.normal(size=(2000, 128))
    b = rng.normal(size=128)
    u = rng.uniform(size=(2000, 128))
    z = np.empty_like(zlin)
    hd = np.empty_like(zlin)
    return lambda: _kernels.hidden_forward(zlin, b, u, 0.8, 1.25, z, hd)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="best-of-N timing")
    args = parser.parse_args()

    workloads = [
        ("ffnn training (1000x3 -> 128,128 -> 5, 300 iters)", ffnn_training()),
        ("knn predict (5000 train, 2000 queries, k=20)", knn_prediction()),
        ("hidden layer forward (2000x128, dropout)", dropout_forward()),
    ]
    backends = ["numpy"]
    if _kernels.HAS_NUMBA:
        backends.append("numba")
    else:
        print("numba not installed; timing the numpy backend only\n")

    results = {}
    for backend in backends:
        with _kernels.use_backend(backend):
            _kernels.warmup()
            for name, fn in workloads:
                results[(backend, name)] = bench(fn, args.repeats)

    width = max(len(name) for name, _ in workloads)
    header = f"{'workload':<{width}}  " + "  ".join(f"{b:>10}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, _ in workloads:
        row = f"{name:<{width}}  "
        row += "  ".join(f"{results[(b, name)] * 1000:>8.1f}ms" for b in backends)
        if len(backends) == 2:
            ratio = results[("numpy", name)] / results[("numba", name)]
            row += f"  {ratio:>7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
