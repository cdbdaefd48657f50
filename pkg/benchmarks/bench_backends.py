"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Each case runs in a subprocess with SE3KIT_NUMBA set so the backend choice is
clean; compile time is excluded by a warmup call inside the timed process.

Usage: python benchmarks/bench_backends.py [--steps 2000] [--evals 2000]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import textwrap

_WORKER = textwrap.dedent("""
    import json, sys, time
    import numpy as np
    from se3kit import backend, models, plant
    from se3kit import _kernels as K

    steps = int(sys.argv[1])
    evals = int(sys.argv[2])
    arm = models.elbow_6dof()

    # closed-loop integrator
    sc = plant.load_scenario("builtin:regulation", arm)
    sc.dt = 1e-3
    sc.horizon = 2 * sc.dt
    plant.run_closed_loop(arm, sc)          # warmup/compile
    sc.horizon = steps * sc.dt
    t0 = time.perf_counter()
    plant.run_closed_loop(arm, sc)
    t_loop = time.perf_counter() - t0

    # joint-space dynamics evaluation (mass + Coriolis + gravity)
    rng = np.random.default_rng(0)
    qs = rng.uniform(-1, 1, (evals, 6))
    qds = rng.standard_normal((evals, 6))
    plant.joint_dynamics(arm, qs[0], qds[0])  # warmup
    t0 = time.perf_counter()
    for q, qd in zip(qs, qds):
        K.joint_dynamics_arrays(arm.joint_twists, q, qd, arm.coms, arm.masses,
                                arm.inertias, np.array([0.0, 0.0, -9.81]), 1e-6)
    t_dyn = time.perf_counter() - t0

    # exp/log roundtrips
    xis = rng.standard_normal((evals, 6))
    K.log_se3(K.exp_se3(xis[0]))              # warmup
    t0 = time.perf_counter()
    for xi in xis:
        K.log_se3(K.exp_se3(xi))
    t_explog = time.perf_counter() - t0

    json.dump({"backend": backend.BACKEND,
               "closed_loop_us_per_step": 1e6 * t_loop / steps,
               "dynamics_us_per_eval": 1e6 * t_dyn / evals,
               "explog_us_per_roundtrip": 1e6 * t_explog / evals},
              sys.stdout)
""")


def run_backend(flag: str, steps: int, evals: int) -> dict:
    env = dict(os.environ, SE3KIT_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", _WORKER, str(steps), str(evals)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=2000,
                        help="closed-loop RK4 steps per backend")
    parser.add_argument("--evals", type=int, default=2000,
                        help="dynamics / exp-log evaluations per backend")
    args = parser.parse_args()

    fast = run_backend("1", args.steps, args.evals)
    slow = run_backend("0", max(args.steps // 20, 10), max(args.evals // 20, 10))
    rows = [
        ("closed-loop step", "closed_loop_us_per_step"),
        ("dynamics eval", "dynamics_us_per_eval"),
        ("exp/log roundtrip", "explog_us_per_roundtrip"),
    ]
    print(f"{'case':<20}{fast['backend']:>14}{slow['backend']:>14}{'speedup':>10}")
    for label, key in rows:
        speedup = slow[key] / fast[key]
        print(f"{label:<20}{fast[key]:>12.1f}us{slow[key]:>12.1f}us{speedup:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
