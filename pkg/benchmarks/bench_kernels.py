"""Compiled kernel vs pure-Python stepper on the built-in experiments.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from proxflow import HAVE_COMPILED, DynParams, SolverConfig, get_preset, integrate
from proxflow.presets import DEFAULT_START

CASES = [
    ("example1", 0.5, 1.0, SolverConfig(method="rk4", step=1e-3, t_max=20.0)),
    ("example1", 0.5, 1.0, SolverConfig(method="adaptive", t_max=100.0)),
    ("example1-2d", 0.5, 5.0, SolverConfig(method="rk4", step=1e-3, t_max=20.0)),
    ("example2", 0.5, 0.3, SolverConfig(method="euler", step=1e-3, t_max=20.0)),
]


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_COMPILED:
        raise SystemExit("compiled kernel not built; reinstall with a C++ compiler")
    print(f"{'case':<34}{'samples':>9}{'compiled':>12}{'python':>12}{'speedup':>9}{'max diff':>11}")
    for name, lam, c, cfg in CASES:
        pb = get_preset(name)
        p = DynParams.from_c(lam, 1.0, c, c, pb.L)
        x0, y0 = DEFAULT_START[name]
        tc, a = timed(lambda: integrate(pb, p, x0, y0, cfg, backend="compiled"), args.repeat)
        tp, b = timed(lambda: integrate(pb, p, x0, y0, cfg, backend="python"), args.repeat)
        diff = float(np.max(np.abs(a.states - b.states))) if len(a) == len(b) else np.nan
        label = f"{name} {cfg.method} lam={lam} c={c}"
        print(f"{label:<34}{len(a):>9}{tc:>11.4f}s{tp:>11.4f}s{tp / tc:>8.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
