#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the two hot paths (IRLS residual/normal-equation accumulation and
SAD block matching) plus batched bilinear sampling, on payloads sized like
a real tracking run, and reports the speedup of the native extension.
"""

import argparse
import time

import numpy as np

from photovo._kernels import get_backend


def make_accumulate_payload(n_points=20000, h=192, w=256, seed=0):
    rng = np.random.default_rng(seed)
    points = np.stack(
        [rng.uniform(-1.5, 1.5, n_points), rng.uniform(-1.0, 1.0, n_points), rng.uniform(1.2, 4.0, n_points)],
        axis=1,
    )
    ref_vals = rng.random(n_points)
    gu = rng.normal(0, 0.05, n_points)
    gv = rng.normal(0, 0.05, n_points)
    sigma_d = 0.0025 * points[:, 2] ** 2
    theta = 0.015
    R = np.array([[np.cos(theta), -np.sin(theta), 0], [np.sin(theta), np.cos(theta), 0], [0, 0, 1.0]])
    t = np.array([0.01, -0.015, 0.02])
    track = rng.random((h, w))
    return dict(
        points=points,
        ref_vals=ref_vals,
        grad_u=gu,
        grad_v=gv,
        sigma_d=sigma_d,
        R=R,
        t=t,
        fu=150.0,
        fv=150.0,
        cu=(w - 1) / 2,
        cv=(h - 1) / 2,
        track=track,
        huber_k=1.345,
        sigma_i=0.02,
    )


def make_stereo_payload(h=192, w=256, seed=1):
    rng = np.random.default_rng(seed)
    base = rng.random((h // 4 + 2, w // 4 + 2))
    left = np.kron(base, np.ones((4, 4)))[:h, :w]
    right = np.roll(left, -6, axis=1)
    return left, right


def time_call(fn, repeats):
    fn()  # warm up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    backends = {}
    backends["numpy"] = get_backend("numpy")
    try:
        backends["native"] = get_backend("native")
    except ImportError:
        print("native extension not built; benchmarking the fallback only")

    acc = make_accumulate_payload()
    left, right = make_stereo_payload()
    rng = np.random.default_rng(2)
    us = rng.uniform(0, 255, 50000)
    vs = rng.uniform(0, 191, 50000)
    img = rng.random((192, 256))

    cases = {
        "accumulate_system (20k px)": lambda k: k.accumulate_system(
            acc["points"], acc["ref_vals"], acc["grad_u"], acc["grad_v"], acc["sigma_d"],
            acc["R"], acc["t"], acc["fu"], acc["fv"], acc["cu"], acc["cv"],
            acc["track"], acc["huber_k"], acc["sigma_i"], None,
        ),
        "block_match (256x192, 64 disp)": lambda k: k.block_match(left, right, 7, 64),
        "bilinear_many (50k samples)": lambda k: k.bilinear_many(img, us, vs),
    }

    results = {}
    for case, call in cases.items():
        results[case] = {name: time_call(lambda k=kern: call(k), args.repeats) for name, kern in backends.items()}

    width = max(len(c) for c in cases)
    header = f"{'kernel':<{width}}  " + "".join(f"{n:>12}" for n in backends) + ("     speedup" if len(backends) > 1 else "")
    print(header)
    print("-" * len(header))
    for case, times in results.items():
        row = f"{case:<{width}}  " + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in backends)
        if "native" in times and "numpy" in times:
            row += f"  {times['numpy'] / times['native']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
