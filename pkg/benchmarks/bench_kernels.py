"""Compare the compiled kernels against the pure-python fallback.

Run:  python3 benchmarks/bench_kernels.py [--reps 25]

Times the two hot kernels (row-wise weighted moments, binomial grid
search) on both backends, verifies they agree, then times an end-to-end
bootstrap run per backend via the DYNBORROW_FORCE_FALLBACK switch in a
subprocess (the backend is chosen at import).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from dynborrow._kernels import BACKEND, _fallback  # noqa: E402

if BACKEND == "compiled":
    from dynborrow._kernels import _core as _compiled
else:
    _compiled = None


def _bench(fn, reps):
    best = min(timeit.repeat(fn, number=1, repeat=reps))
    return best


def bench_weighted(reps):
    rng = np.random.default_rng(0)
    y = rng.normal(size=400)
    w = rng.exponential(size=(2000, 400))
    w *= 400.0 / w.sum(axis=1, keepdims=True)

    t_fb = _bench(lambda: _fallback.weighted_mean_var(y, w), reps)
    print(f"weighted_mean_var  fallback  {t_fb * 1e3:8.3f} ms")
    if _compiled is None:
        return
    t_c = _bench(lambda: _compiled.weighted_mean_var(y, w), reps)
    m1, v1 = _fallback.weighted_mean_var(y, w)
    m2, v2 = _compiled.weighted_mean_var(y, w)
    agree = np.allclose(m1, m2, atol=1e-12) and np.allclose(v1, v2, atol=1e-12)
    print(f"weighted_mean_var  compiled  {t_c * 1e3:8.3f} ms"
          f"   speedup x{t_fb / t_c:5.1f}   agree={agree}")


def bench_grid(reps):
    rng = np.random.default_rng(1)
    grid = np.arange(51) / 50.0
    B = 2000
    y1 = rng.uniform(5, 95, B)
    y0 = rng.uniform(2, 38, B)

    t_fb = _bench(lambda: _fallback.binom_grid_best_a0(grid, y1, 100.0, y0, 40.0), reps)
    print(f"binom_grid_best_a0 fallback  {t_fb * 1e3:8.3f} ms")
    if _compiled is None:
        return
    t_c = _bench(lambda: _compiled.binom_grid_best_a0(grid, y1, 100.0, y0, 40.0), reps)
    a1 = _fallback.binom_grid_best_a0(grid, y1, 100.0, y0, 40.0)
    a2 = _compiled.binom_grid_best_a0(grid, y1, 100.0, y0, 40.0)
    agree = bool(np.array_equal(a1, a2))
    print(f"binom_grid_best_a0 compiled  {t_c * 1e3:8.3f} ms"
          f"   speedup x{t_fb / t_c:5.1f}   agree={agree}")


_E2E = r"""
import time
import numpy as np
import dynborrow as db
rng = np.random.default_rng(7)
d0 = db.ControlSample(rng.normal(0, 1.5, 60), db.OutcomeKind.CONTINUOUS, source_label="internal")
d1 = db.ControlSample(rng.normal(0.2, 1.5, 180), db.OutcomeKind.CONTINUOUS, source_label="external")
rules = [db.BorrowingRule.from_name(n) for n in ("minmse", "maxml")]
run = lambda: db.run_many(d0, d1, rules, 4000, 123)
run()  # warm
t0 = time.perf_counter(); out = run(); t1 = time.perf_counter()
print(f"{db.kernel_backend} end-to-end 2 rules x 4000 reps: {(t1 - t0) * 1e3:8.1f} ms   "
      f"mean={out[0].mu_c.mean():.6f}")
"""


def bench_end_to_end():
    for force in ("0", "1"):
        env = dict(os.environ, DYNBORROW_FORCE_FALLBACK=force)
        subprocess.run([sys.executable, "-c", _E2E], env=env, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=25)
    args = parser.parse_args()
    print(f"active backend: {BACKEND}")
    bench_weighted(args.reps)
    bench_grid(args.reps)
    print()
    bench_end_to_end()


if __name__ == "__main__":
    main()
