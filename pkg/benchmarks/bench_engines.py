"""Benchmark the pure-Python engine against the compiled kernels.

Runs the same batch of paths through both lanes, times them, and verifies
that the outputs are bit-identical (same times/states/increments, same
lifetimes) — the compiled lane is required to be a faithful mirror of the
Python one, so any drift here is a bug, not a tolerance question.

Usage:
    python3 benchmarks/bench_engines.py [--paths N] [--workers W]
"""

import argparse
import time

import numpy as np

from domsde.integrate import HAVE_KERNELS, StepPolicy, simulate_paths
from domsde.models import build_model

# name, params, start, horizon, policy
CASES = [
    ("bm", {"dim": 4}, (0.0, (0.0, 0.0, 0.0, 0.0)), 1.0, StepPolicy.fixed(1e-3)),
    ("ou", {}, (0.0, (1.0,)), 1.0, StepPolicy.fixed(1e-3)),
    ("bessel-drift", {}, (0.0, (1.0,)), 5.0, StepPolicy()),
    ("example-6-1-1", {}, (0.0, (0.5,)), 2.0, StepPolicy()),
    # paths stall near the singular plane at ever-smaller adaptive steps;
    # cap the step count so the benchmark terminates (both lanes apply the
    # same cap and must agree on which paths are unresolved).
    ("example-6-1-2", {}, (0.0, (1.0, 1.0)), 0.5,
     StepPolicy(dt_max=1e-3, max_steps=20000)),
    ("example-6-2", {"delta": 0.5}, (0.0, (1.0,)), 1.0,
     StepPolicy(dt_max=1e-2)),
]


def _run(model, start, horizon, policy, seed, n_paths, workers, engine):
    t0 = time.perf_counter()
    recs = simulate_paths(
        model.coefficients, model.domain, start, horizon, policy, seed,
        n_paths, workers=workers, engine=engine, kernel=model.kernel,
    )
    elapsed = time.perf_counter() - t0
    return recs, elapsed


def _identical(a, b):
    for ra, rb in zip(a, b):
        if ra.killed != rb.killed or ra.unresolved != rb.unresolved:
            return False
        if ra.killed and ra.xi != rb.xi:
            return False
        if not (np.array_equal(ra.times, rb.times)
                and np.array_equal(ra.states, rb.states)
                and np.array_equal(ra.dts, rb.dts)):
            return False
    return True


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=500,
                    help="paths per case (default 500)")
    ap.add_argument("--workers", type=int, default=1,
                    help="worker threads for both lanes (default 1)")
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args(argv)

    if not HAVE_KERNELS:
        print("compiled kernels unavailable; benchmarking python lane only")
    print("%-16s %5s %8s  %12s %12s %8s  %s"
          % ("model", "dim", "paths", "python", "compiled", "speedup",
             "bit-identical"))
    for name, params, start, horizon, policy in CASES:
        model = build_model(name, params)
        py, t_py = _run(model, start, horizon, policy, args.seed,
                        args.paths, args.workers, "python")
        substeps = sum(r.substeps for r in py)
        if HAVE_KERNELS and model.kernel is not None:
            co, t_co = _run(model, start, horizon, policy, args.seed,
                            args.paths, args.workers, "compiled")
            same = _identical(py, co)
            print("%-16s %5d %8d  %10.3fs %10.3fs %7.1fx  %s  (%d substeps)"
                  % (model.name, model.dim, args.paths, t_py, t_co,
                     t_py / t_co, "yes" if same else "NO", substeps))
        else:
            print("%-16s %5d %8d  %10.3fs %12s %8s  (%d substeps)"
                  % (model.name, model.dim, args.paths, t_py, "-", "-",
                     substeps))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
