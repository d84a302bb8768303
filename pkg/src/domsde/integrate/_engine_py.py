"""Pure-Python Euler engine for arbitrary coefficient callables.

This engine is the reference implementation and the fallback when the
compiled kernels are unavailable. The update arithmetic is written in
scalar form (explicit loops, libm functions, fixed evaluation order, no
BLAS/SIMD reductions) and the compiled kernels mirror it expression by
expression, so a given (seed, path index) produces bit-identical paths on
either lane for the builtin kernel models. Do not "vectorize" the inner
loop without updating the kernels to match.
"""

import math

import numpy as np

from ..errors import PreconditionError
from ._records import PathRecord, Survived, _step_value


def simulate_path_generic(coeffs, domain, s, x0, horizon, policy, rng,
                          record_dw=False, seed=0, path_index=0):
    """Simulate one path; see integrate.simulate_path for the contract."""
    d = coeffs.dim
    T = float(horizon)
    if T <= 0.0:
        raise PreconditionError("horizon must be positive")
    x = [float(v) for v in x0]
    x_arr = np.array(x, dtype=np.float64)
    t = 0.0

    times = [0.0]
    states = [list(x)]
    dts = []
    dws = [] if record_dw else None

    clips = 0
    steps = 0
    min_ed = math.inf
    killed = False
    xi = None
    exit_state = None
    unresolved = False

    # exit distances are computed when the boundary term is active or cheap
    # (analytic domains); predicate-only domains skip them under c1 = inf
    track_ed = math.isfinite(policy.c1) or domain.name != "predicate"
    b_max = policy.b_max
    k_est = coeffs.k_est

    while t < T:
        t_abs = s + t
        b_raw = coeffs.drift_at(t_abs, x_arr)
        b = [float(b_raw[i]) for i in range(d)]
        bb = 0.0
        for i in range(d):
            bb += b[i] * b[i]
        if bb > b_max * b_max:
            scale = b_max / math.sqrt(bb)
            for i in range(d):
                b[i] = b[i] * scale
            bb = 0.0
            for i in range(d):
                bb += b[i] * b[i]
            clips += 1
            if clips > policy.clip_cap:
                unresolved = True
                break

        if track_ed:
            ed = domain.exit_distance((t_abs, x_arr))
            if ed < min_ed:
                min_ed = ed
        else:
            ed = math.inf

        dt = _step_value(policy, ed, bb, k_est)
        last = False
        if dt >= T - t:
            dt = T - t
            last = True

        sig = coeffs.sigma_at(t_abs, x_arr)
        z = rng.standard_normal(d)
        sqdt = math.sqrt(dt)
        y = []
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += float(sig[i, j]) * (sqdt * float(z[j]))
            y.append(acc)
        bdt = [b[i] * dt for i in range(d)]
        xn = [x[i] + bdt[i] + y[i] for i in range(d)]
        tn = T if last else t + dt

        steps += 1
        if steps > policy.max_steps:
            unresolved = True
            break

        xn_arr = np.array(xn, dtype=np.float64)
        if domain.contains((s + tn, xn_arr)):
            x = xn
            x_arr = xn_arr
            t = tn
            times.append(t)
            states.append(list(x))
            dts.append(dt)
            if record_dw:
                dws.append([sqdt * float(z[j]) for j in range(d)])
            if last:
                break
        else:
            lo = 0.0
            hi = 1.0
            while dt * (hi - lo) > policy.tol_xi:
                mid = 0.5 * (lo + hi)
                xm = np.array(
                    [x[i] + mid * bdt[i] + mid * y[i] for i in range(d)],
                    dtype=np.float64,
                )
                if domain.contains((s + (t + mid * dt), xm)):
                    lo = mid
                else:
                    hi = mid
            xi = t + hi * dt
            killed = True
            exit_state = np.array(
                [x[i] + hi * bdt[i] + hi * y[i] for i in range(d)],
                dtype=np.float64,
            )
            dts.append(hi * dt)
            if record_dw:
                dws.append([hi * (sqdt * float(z[j])) for j in range(d)])
            break

    return PathRecord(
        s=float(s),
        x0=np.array(x0, dtype=np.float64),
        times=np.array(times, dtype=np.float64),
        states=np.array(states, dtype=np.float64).reshape(len(times), d),
        dts=np.array(dts, dtype=np.float64),
        dws=(np.array(dws, dtype=np.float64).reshape(len(dts), d)
             if record_dw else None),
        xi=(xi if killed else Survived(T)),
        killed=killed,
        exit_state=exit_state,
        drift_clips=clips,
        substeps=steps,
        min_boundary_distance=min_ed,
        unresolved=unresolved,
        seed=int(seed),
        path_index=int(path_index),
    )
