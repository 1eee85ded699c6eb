#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the individual hot kernels on training-sized shapes and a full
end-to-end epoch under each backend.  Run from the repo root:

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from vbdrop import _kernels_np as knp
from vbdrop import backend
from vbdrop.data import make_synthetic
from vbdrop.tensor import make_rng
from vbdrop.training import TrainConfig, train
from vbdrop.variants import Variant

try:
    from vbdrop import _kernels_c as kc
except ImportError:
    kc = None


def timeit(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(m=128, k=784, d=300):
    rng = make_rng(0)
    a = rng.standard_normal((m, k))
    theta = rng.standard_normal((k, d))
    sigma2 = np.exp(rng.standard_normal((k, d)) - 4)
    eps = rng.standard_normal((m, d))
    gb = rng.standard_normal((m, d))
    delta = knp.local_reparam_forward(a, theta, sigma2, eps)[1]
    logits = rng.standard_normal((m, 10)) * 3
    labels = rng.integers(0, 10, m)
    p = rng.standard_normal(k * d)
    g = rng.standard_normal(k * d)
    mom = np.zeros(k * d)
    vel = np.zeros(k * d)
    relu_in = rng.standard_normal((m, d))
    return {
        f"matmul {m}x{k} @ {k}x{d}": lambda K: K.matmul(a, theta),
        "local_reparam_forward": lambda K: K.local_reparam_forward(
            a, theta, sigma2, eps
        ),
        "local_reparam_backward": lambda K: K.local_reparam_backward(
            gb, a, theta, sigma2, delta, eps
        ),
        "softmax_xent": lambda K: K.softmax_xent(logits, labels),
        f"adam_update ({k * d} params)": lambda K: K.adam_update(
            p, g, mom, vel, 3, 1e-3, 0.9, 0.999, 1e-8
        ),
        f"penalty_vbd ({k}x{d})": lambda K: K.penalty_vbd(theta, sigma2),
        "relu": lambda K: K.relu(relu_in),
    }


def bench_kernels(repeats):
    print(f"{'kernel':<34}{'numpy':>12}{'cython':>12}{'speedup':>9}")
    for name, case in kernel_cases().items():
        t_np = timeit(lambda: case(knp), repeats)
        if kc is None:
            print(f"{name:<34}{t_np * 1e3:>10.3f}ms{'-':>12}{'-':>9}")
            continue
        t_c = timeit(lambda: case(kc), repeats)
        print(
            f"{name:<34}{t_np * 1e3:>10.3f}ms{t_c * 1e3:>10.3f}ms"
            f"{t_np / t_c:>8.2f}x"
        )


def bench_end_to_end(repeats):
    train_ds = make_synthetic(0, 400, 4, 64, part=0)
    test_ds = make_synthetic(0, 100, 4, 64, part=1)
    variant = Variant("vbd", per_weight=True, noise_input_layer=True)

    def run():
        cfg = TrainConfig(arch=[64, 128, 64, 4], epochs=3, batch_size=64, seed=1)
        train(train_ds, test_ds, variant, cfg)

    impls = [("numpy", knp)] + ([("cython", kc)] if kc is not None else [])
    times = {}
    for name, impl in impls:
        saved = backend.kernels
        backend.kernels = impl
        try:
            times[name] = timeit(run, repeats)
        finally:
            backend.kernels = saved
    line = "  ".join(f"{name}: {t:.3f}s" for name, t in times.items())
    if len(times) == 2:
        line += f"  speedup: {times['numpy'] / times['cython']:.2f}x"
    print(f"\nend-to-end 3-epoch training   {line}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    print(f"active backend: {backend.name()}"
          + ("" if kc is not None else " (compiled extension unavailable)"))
    bench_kernels(args.repeats)
    bench_end_to_end(max(2, args.repeats // 2))


if __name__ == "__main__":
    main()
