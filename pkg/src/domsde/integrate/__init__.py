"""Path generation with maximal-local-solution semantics.

Two engines produce paths:

* a pure-Python engine handling arbitrary coefficient callables and
  domains (the reference implementation and fallback), and
* compiled kernels (Cython) for the builtin coefficient families, selected
  automatically when the extension built and the model declares a
  ``KernelSpec``.

The two lanes implement identical arithmetic (same libm calls, same
evaluation order) and consume identical per-path Philox streams, so paths
are bit-identical across lanes; worker counts never affect results because
every path owns its stream.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, PreconditionError
from ..rng import path_stream
from ._engine_py import simulate_path_generic
from ._records import PathRecord, StepPolicy, Survived, run_counter, step_size

try:
    from . import _kernels
    HAVE_KERNELS = True
except ImportError:  # extension not built; pure-Python lane only
    _kernels = None
    HAVE_KERNELS = False

__all__ = [
    "StepPolicy",
    "PathRecord",
    "Survived",
    "KernelSpec",
    "HAVE_KERNELS",
    "step_size",
    "run_counter",
    "simulate_path",
    "simulate_paths",
    "iter_paths",
    "resolve_engine",
]

#: Gaussian scratch-buffer length for the compiled lane
_ZBUF_LEN = 4096

KERNEL_LINEAR_DIAG = 1
KERNEL_BESSEL = 2
KERNEL_INV_QUAD = 3
KERNEL_SINGULAR_POTENTIAL = 4
KERNEL_LOG_PLANE = 5


@dataclass(frozen=True)
class KernelSpec:
    """Dispatch record telling the compiled lane how to run a model."""

    kernel_id: int
    params: tuple
    domain_code: int


def resolve_engine(engine, kernel):
    """Map an engine request to the lane actually used for this model."""
    if engine == "python":
        return "python"
    if engine == "compiled":
        if not HAVE_KERNELS:
            raise ConfigError(
                "engine 'compiled' requested but the extension is not built"
            )
        if kernel is None:
            raise ConfigError(
                "engine 'compiled' requested but this model has no kernel"
            )
        return "compiled"
    if engine == "auto":
        return "compiled" if (HAVE_KERNELS and kernel is not None) else "python"
    raise ConfigError("unknown engine %r (use auto | python | compiled)" % engine)


def _initial_capacity(policy, horizon):
    est = int(horizon / policy.dt_max) + 16
    return int(min(policy.max_steps + 2, max(4096, est)))


def _run_kernel_path(kernel, s, x0, horizon, policy, k_est, seed, path_index,
                     family, record_dw):
    d = len(x0)
    cap = _initial_capacity(policy, horizon)
    kparams = np.asarray(kernel.params, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    status = 1
    while True:
        gen = path_stream(seed, path_index, family)
        times = np.empty(cap)
        states = np.empty((cap, d))
        dts = np.empty(cap)
        dws = np.empty((cap, d)) if record_dw else np.empty((1, d))
        scal = np.zeros(8)
        exit_out = np.zeros(d)
        zbuf = np.empty(_ZBUF_LEN)
        status = _kernels.run_path(
            kernel.kernel_id, kparams, kernel.domain_code,
            float(s), x0, float(horizon),
            policy.dt_max, policy.dt_min, policy.c1, policy.c2,
            policy.tol_xi, policy.b_max, int(policy.clip_cap),
            int(policy.max_steps), float(k_est),
            gen, zbuf, int(record_dw),
            times, states, dts, dws, scal, exit_out,
        )
        if status == 0 or cap >= policy.max_steps + 2:
            break
        cap = int(min(policy.max_steps + 2, cap * 2))
    xi, killed_f, clips, steps, min_ed, unres_f, nrec_f, nincr_f = scal
    nrec = int(nrec_f)
    n_incr = int(nincr_f)
    killed = bool(killed_f)
    unresolved = bool(unres_f) or status != 0
    return PathRecord(
        s=float(s),
        x0=x0.copy(),
        times=times[:nrec].copy(),
        states=states[:nrec].copy(),
        dts=dts[:n_incr].copy(),
        dws=(dws[:n_incr].copy() if record_dw else None),
        xi=(float(xi) if killed else Survived(float(horizon))),
        killed=killed,
        exit_state=(exit_out.copy() if killed else None),
        drift_clips=int(clips),
        substeps=int(steps),
        min_boundary_distance=float(min_ed),
        unresolved=unresolved,
        seed=int(seed),
        path_index=int(path_index),
    )


def simulate_path(coeffs, domain, start, horizon, policy=None, rng=None,
                  seed=0, path_index=0, record_dw=False):
    """Simulate one path of the SDE from ``start`` up to exit or horizon.

    Explicit Euler with the adaptive step policy; after each step the
    space-time point is tested for membership in Q, and on failure the exit
    time is refined by bisection on the step fraction (drift and diffusion
    increments scaled linearly, same Gaussian draw). Killed paths absorb at
    the cemetery: nothing is recorded past xi.

    ``rng`` defaults to the path's own Philox stream from
    (seed, path_index). This entry point always uses the pure-Python
    engine; use simulate_paths with a kernel-capable model for the compiled
    lane.
    """
    if policy is None:
        policy = StepPolicy()
    if not domain.contains(start):
        raise PreconditionError(
            "simulate_path requires the start to lie in the open domain"
        )
    s, x0 = start if not hasattr(start, "t") else (start.t, start.x)
    if rng is None:
        rng = path_stream(seed, path_index)
    return simulate_path_generic(
        coeffs, domain, float(s), np.asarray(x0, dtype=np.float64),
        float(horizon), policy, rng,
        record_dw=record_dw, seed=seed, path_index=path_index,
    )


def iter_paths(coeffs, domain, start, horizon, policy, seed, n_paths,
               workers=1, engine="auto", kernel=None, record_dw=False,
               family=0, first_index=0):
    """Yield (path_index, PathRecord) for n_paths independent paths.

    Results may arrive in any order when workers > 1; each record is a pure
    function of (seed, path_index, family, config), so placing results by
    index gives worker-count-independent aggregates.
    """
    if not domain.contains(start):
        raise PreconditionError("start point must lie in the open domain")
    s, x0 = start if not hasattr(start, "t") else (start.t, start.x)
    s = float(s)
    x0 = np.asarray(x0, dtype=np.float64)
    lane = resolve_engine(engine, kernel)
    k_est = coeffs.k_est

    def one(idx):
        if lane == "compiled":
            return idx, _run_kernel_path(
                kernel, s, x0, horizon, policy, k_est, seed, idx, family,
                record_dw,
            )
        rng = path_stream(seed, idx, family)
        return idx, simulate_path_generic(
            coeffs, domain, s, x0, float(horizon), policy, rng,
            record_dw=record_dw, seed=seed, path_index=idx,
        )

    indices = range(first_index, first_index + n_paths)
    if workers <= 1:
        for idx in indices:
            yield one(idx)
        return
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        for result in pool.map(one, indices, chunksize=16):
            yield result


def simulate_paths(coeffs, domain, start, horizon, policy, seed, n_paths,
                   workers=1, engine="auto", kernel=None, record_dw=False,
                   family=0):
    """Simulate n_paths paths and return them ordered by path index."""
    out = [None] * n_paths
    for idx, rec in iter_paths(
        coeffs, domain, start, horizon, policy, seed, n_paths,
        workers=workers, engine=engine, kernel=kernel, record_dw=record_dw,
        family=family,
    ):
        out[idx] = rec
    return out
