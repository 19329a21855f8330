#!/usr/bin/env python3
"""Time the compiled and pure-Python integrator kernels on matched runs.

The two backends promise bit-identical output (same draw order, same
floating-point expression shapes).  This script asserts that agreement on the
full ensemble before reporting timings, so a speedup can never come from a
drift in semantics.

Usage:
    python3 benchmarks/compare_backends.py [--scenario NAME] [--paths N]
                                           [--horizon T] [--dt-max DT]
"""

import argparse
import os
import time

import numpy as np

from levylv import PathConfig, scenario, scenario_names, simulate_ensemble
from levylv.backend import HAVE_COMPILED


def run_backend(name, model, cfg, n_paths, grid):
    os.environ["LEVYLV_BACKEND"] = name
    start = time.perf_counter()
    summary = simulate_ensemble(model, cfg, n_paths, grid)
    return summary, time.perf_counter() - start


def assert_bit_identical(a, b):
    checks = (
        np.array_equal(a.states, b.states, equal_nan=True),
        np.array_equal(a.statuses, b.statuses),
        np.array_equal(a.terminal_states, b.terminal_states),
        np.array_equal(a.jump_counts, b.jump_counts),
    )
    if not all(checks):
        raise SystemExit("backends disagree bitwise; refusing to report timings")


def main():
    ap = argparse.ArgumentParser(
        description="Compare compiled vs pure-Python simulation kernels."
    )
    ap.add_argument("--scenario", default="jump_suppressed",
                    choices=scenario_names())
    ap.add_argument("--paths", type=int, default=100)
    ap.add_argument("--horizon", type=float, default=5.0)
    ap.add_argument("--dt-max", dest="dt_max", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not HAVE_COMPILED:
        raise SystemExit("compiled extension not built; nothing to compare")

    model = scenario(args.scenario)
    cfg = PathConfig(horizon=args.horizon, dt_max=args.dt_max, seed=args.seed)
    grid = np.linspace(0.0, args.horizon, 11)

    saved = os.environ.get("LEVYLV_BACKEND")
    try:
        py, t_py = run_backend("python", model, cfg, args.paths, grid)
        cy, t_cy = run_backend("compiled", model, cfg, args.paths, grid)
    finally:
        if saved is None:
            os.environ.pop("LEVYLV_BACKEND", None)
        else:
            os.environ["LEVYLV_BACKEND"] = saved

    assert_bit_identical(py, cy)

    print(f"scenario={args.scenario} paths={args.paths} "
          f"horizon={args.horizon} dt_max={args.dt_max} seed={args.seed}")
    print(f"python  : {t_py:8.3f} s")
    print(f"compiled: {t_cy:8.3f} s")
    print(f"speedup : {t_py / t_cy:.1f}x (outputs bit-identical)")


if __name__ == "__main__":
    main()
