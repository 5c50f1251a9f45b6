"""Compare the compiled kernels with the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Times each kernel on a crowd of the size used at density 0.3 and then a
short counter-flow trial with each backend swapped in.
"""

import argparse
import time

import numpy as np

from platoonsim import kernels
from platoonsim.crowd import CrowdParams
from platoonsim.engine import TrialConfig, init_trial, step
from platoonsim.geometry import Environment

NAMES = ("social_repulsion", "resolve_pairs", "contact_matrix", "wall_repulsion",
         "resolve_walls", "clearance_scan")
W, H = 10.0, 5.0


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(backend, n=212, m=10, seed=0):
    rng = np.random.default_rng(seed)
    p = CrowdParams()
    pos = np.column_stack([rng.uniform(0, W, n), rng.uniform(0, H, n)])
    robots = np.column_stack([rng.uniform(0, W, m), rng.uniform(0, H, m)])
    dirs = np.tile([-1.0, 0.0], (n, 1))
    walls = Environment.for_scenario("counter_flow").crowd_wall_array
    cand = np.column_stack([rng.uniform(5.15, 9.85, 50), rng.uniform(0, H, 50)])
    return {
        "social_repulsion": lambda: backend.social_repulsion(
            pos, dirs, robots, p.pair_strength, p.pair_range, p.cos_phi,
            p.out_of_view_weight, p.cutoff, W, H),
        "resolve_pairs": lambda: backend.resolve_pairs(robots.copy(), pos.copy(), 0.15, 0.15, W, H),
        "contact_matrix": lambda: backend.contact_matrix(robots, pos, 0.3, W, H),
        "wall_repulsion": lambda: backend.wall_repulsion(pos, walls, p.wall_strength, p.wall_range),
        "resolve_walls": lambda: backend.resolve_walls(pos.copy(), 0.15, walls),
        "clearance_scan": lambda: backend.clearance_scan(cand, pos, robots, 0.3, 0.3, W, H),
    }


def trial_time(backend, steps):
    saved = {name: getattr(kernels, name) for name in NAMES}
    for name in NAMES:
        setattr(kernels, name, getattr(backend, name))
    try:
        cfg = TrialConfig(scenario="counter_flow", strategy="adaptive", density=0.3, seed=0)
        w = init_trial(cfg)
        t0 = time.perf_counter()
        for _ in range(steps):
            step(w, cfg)
        return time.perf_counter() - t0
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--steps", type=int, default=300)
    args = ap.parse_args()

    names = kernels.available_backends()
    backends = {name: kernels.load_backend(name) for name in names}
    cases = {name: kernel_cases(b) for name, b in backends.items()}
    print(f"{'kernel':<18}" + "".join(f"{n + ' (ms)':>16}" for n in names)
          + (f"{'speedup':>10}" if len(names) == 2 else ""))
    for kernel in NAMES:
        t = [best_of(cases[n][kernel], args.repeat) * 1e3 for n in names]
        print(f"{kernel:<18}" + "".join(f"{x:>16.3f}" for x in t)
              + (f"{t[1] / t[0]:>9.1f}x" if len(t) == 2 else ""))
    t = [trial_time(backends[n], args.steps) for n in names]
    print(f"{f'trial ({args.steps} st)':<18}" + "".join(f"{x * 1e3:>16.1f}" for x in t)
          + (f"{t[1] / t[0]:>9.1f}x" if len(t) == 2 else ""))


if __name__ == "__main__":
    main()
