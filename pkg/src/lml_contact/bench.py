"""Timing of ``lml_step`` as the feature dimension grows.

Every step costs a handful of matrix-vector products and outer products,
so time per step should grow at most quadratically in ``n_w``; a cubic
factorization would show up as a log-log slope near 3. The factorization
audit is run alongside at every size.
"""

from __future__ import annotations

import time

import numpy as np

from .audit import count_factorizations
from .lml_filter import init_belief, lml_step
from .model_types import NoiseSpec

MAX_SLOPE = 2.5


def _steps_for(n_w: int) -> int:
    # keep each size to roughly the same wall time
    return int(np.clip(4e6 / n_w**2, 5, 200))


def time_lml_step(n_w: int, repeats: int = 3, seed: int = 0, steps: int | None = None) -> dict:
    rng = np.random.default_rng(seed)
    noise = NoiseSpec.create(np.eye(6), n_w, b=1.0, q=1e-6)
    steps = _steps_for(n_w) if steps is None else steps
    W = rng.standard_normal((steps, n_w)) / np.sqrt(n_w)
    Y = rng.standard_normal((steps, 6))

    samples = []
    for _ in range(repeats):
        belief = init_belief(noise)
        for w, y in zip(W, Y):
            t0 = time.perf_counter_ns()
            belief, _ = lml_step(belief, noise, w, y)
            samples.append(time.perf_counter_ns() - t0)

    belief = init_belief(noise)
    with count_factorizations() as events:
        belief, _ = lml_step(belief, noise, W[0], Y[0])
    return {
        "n_w": n_w,
        "median_ns": float(np.median(samples)),
        "samples": len(samples),
        "factorizations": events.total,
    }


def loglog_slope(n_ws, times) -> float | None:
    n_ws = np.asarray(n_ws, dtype=np.float64)
    if len(np.unique(n_ws)) < 2:
        return None
    return float(np.polyfit(np.log(n_ws), np.log(np.asarray(times, dtype=np.float64)), 1)[0])


def run_benchmark(sweep=(19, 190, 1900), repeats: int = 3, seed: int = 0) -> dict:
    sweep = [int(n) for n in sweep]
    if any(n < 1 for n in sweep):
        raise ValueError("sweep values must be >= 1")
    rows = [time_lml_step(n, repeats, seed) for n in sweep]
    slope = loglog_slope([r["n_w"] for r in rows], [r["median_ns"] for r in rows])
    return {
        "rows": rows,
        "slope": slope,
        "max_slope": MAX_SLOPE,
        "slope_ok": slope is None or slope <= MAX_SLOPE,
        "factorizations": sum(r["factorizations"] for r in rows),
    }
