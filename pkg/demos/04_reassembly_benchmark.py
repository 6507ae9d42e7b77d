"""Time the naive per-position reassembly against the vectorized path.

Both paths walk kernel taps in the same row-major order, so outputs
agree to the last bit here; the vectorized path processes a whole tap
plane per step instead of one output position at a time.

Run from the repository root:  python demos/04_reassembly_benchmark.py
"""

import time

import numpy as np

from scopenet import reassemble_naive, reassemble_tiled

rng = np.random.default_rng(0)

for shape, k in [((1, 16, 32, 32), 3), ((1, 64, 64, 64), 5)]:
    n, c, h, w = shape
    feats = rng.standard_normal(shape).astype(np.float32)
    logits = rng.standard_normal((n, k * k, h, w)).astype(np.float32)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    kernels = e / e.sum(axis=1, keepdims=True)

    ref = reassemble_naive(feats, kernels, k)
    fast = reassemble_tiled(feats, kernels, k)
    deviation = np.abs(ref - fast).max()

    def med(fn, reps=3):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn(feats, kernels, k)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    t_naive = med(reassemble_naive)
    t_fast = med(reassemble_tiled)
    print(f"shape {shape} k={k}")
    print(f"  max deviation : {deviation:.2e}")
    print(f"  naive         : {t_naive * 1e3:9.2f} ms")
    print(f"  vectorized    : {t_fast * 1e3:9.2f} ms")
    print(f"  speedup       : {t_naive / t_fast:6.1f}x")
