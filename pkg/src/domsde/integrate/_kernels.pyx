"""Compiled Euler kernels for the builtin coefficient families.

Each kernel mirrors the pure-Python engine (_engine_py) expression by
expression: same evaluation order, same libm calls, same branch structure.
That makes paths bit-identical across the two lanes for a given
(seed, path index) stream, which the test suite asserts. Any change here
must be made in lockstep with _engine_py.simulate_path_generic.

Kernel ids
    1  linear diagonal drift b_i = alpha*x_i + beta, sigma = c*I
    2  Bessel-type          b = -k/x,               sigma = c     (d = 1)
    3  inverse-quadratic    b = -1/x,               sigma = 1/(1+x^2)
    4  singular potential   b from |x|^{-delta}+|x|, sigma = 2+sin x
    5  log-drift plane      b = x*ln|x1|,           sigma = ln(2+|x|^2)*I

Domain codes
    0  full space       (never exits)
    1  half-line x > 0  (exit distance x)
    2  plane minus {x1 = 0} (exit distance |x1|)

Gaussian draws are consumed from a buffer refilled from the path's numpy
Generator under the GIL, preserving the exact draw order of the Python
lane (leftover draws are carried over, never discarded).

Bit identity also constrains the build: fp contraction is disabled, and
sin/cos are not treated as builtins (setup.py), or else the compiler fuses
adjacent calls into glibc's sincos, which can return a sine one ulp away
from sin() — enough to fork a path from the Python lane, which calls sin
and cos separately.
"""

from libc.math cimport sqrt, fabs, log, sin, cos, pow, INFINITY

MAX_DIM = 16


cdef inline double _eval_coeffs(int kid, double* kp, double t, double* x,
                                int d, double* b) nogil:
    """Fill the drift vector b and return the isotropic sigma scalar."""
    cdef double q, l
    cdef int i
    if kid == 1:
        for i in range(d):
            b[i] = kp[0] * x[i] + kp[1]
        return kp[2]
    elif kid == 2:
        b[0] = -kp[0] / x[0]
        return kp[1]
    elif kid == 3:
        b[0] = -1.0 / x[0]
        return 1.0 / (1.0 + x[0] * x[0])
    elif kid == 4:
        q = 2.0 + sin(x[0])
        b[0] = (kp[0] * x[0] * pow(fabs(x[0]), -kp[0] - 2.0)
                - x[0] / fabs(x[0])) * (q * q) + q * cos(x[0])
        return q
    else:  # kid == 5
        l = log(fabs(x[0]))
        b[0] = x[0] * l
        b[1] = x[1] * l
        return log(2.0 + (x[0] * x[0] + x[1] * x[1]))


cdef inline bint _contains(int dom, double t_abs, double* x) nogil:
    if dom == 1:
        return x[0] > 0.0
    elif dom == 2:
        return x[0] != 0.0
    return True


cdef inline double _exit_distance(int dom, double t_abs, double* x) nogil:
    if dom == 1:
        return x[0]
    elif dom == 2:
        return fabs(x[0])
    return INFINITY


def run_path(int kernel_id, double[::1] kparams, int domain_code,
             double s, double[::1] x0, double horizon,
             double dt_max, double dt_min, double c1, double c2,
             double tol_xi, double b_max, long clip_cap, long max_steps,
             double k_est, object gen, double[::1] zbuf, int record_dw,
             double[::1] times, double[:, ::1] states,
             double[::1] dts, double[:, ::1] dws,
             double[::1] scal_out, double[::1] exit_out):
    """Run one path; returns 0 on success, 1 if the record buffers overflowed.

    scal_out receives [xi, killed, clips, steps, min_ed, unresolved,
    n_states, n_incr].
    """
    cdef int d = x0.shape[0]
    cdef long cap = times.shape[0]
    cdef double T = horizon
    cdef double x[16]
    cdef double b[16]
    cdef double y[16]
    cdef double bdt[16]
    cdef double xn[16]
    cdef double xm[16]
    cdef double kp[8]
    cdef int i, j
    cdef long nrec, n_incr, clips, steps, zpos, zcap, q, rem
    cdef double t, t_abs, tn, bb, scale, ed, min_ed, dt, v, sqdt, acc, sval
    cdef double lo, hi, mid, xi
    cdef bint killed = 0, unresolved = 0, last, alive
    cdef int status = 0
    cdef object tmp
    cdef double[::1] tview

    if d > 16 or kparams.shape[0] > 8:
        raise ValueError("kernel dimension/parameter limits exceeded")
    for i in range(d):
        x[i] = x0[i]
    for i in range(kparams.shape[0]):
        kp[i] = kparams[i]

    t = 0.0
    times[0] = 0.0
    for i in range(d):
        states[0, i] = x[i]
    nrec = 1
    n_incr = 0
    clips = 0
    steps = 0
    min_ed = INFINITY
    xi = 0.0
    zcap = zbuf.shape[0]
    zpos = zcap  # force an initial refill

    with nogil:
        while t < T:
            t_abs = s + t
            sval = _eval_coeffs(kernel_id, kp, t_abs, x, d, b)
            bb = 0.0
            for i in range(d):
                bb += b[i] * b[i]
            if bb > b_max * b_max:
                scale = b_max / sqrt(bb)
                for i in range(d):
                    b[i] = b[i] * scale
                bb = 0.0
                for i in range(d):
                    bb += b[i] * b[i]
                clips += 1
                if clips > clip_cap:
                    unresolved = 1
                    break

            ed = _exit_distance(domain_code, t_abs, x)
            if ed < min_ed:
                min_ed = ed

            # step-size formula; keep in lockstep with _records._step_value
            dt = dt_max
            if c1 < INFINITY and ed < INFINITY:
                v = c1 * ed * ed / k_est
                if v < dt:
                    dt = v
            if c2 < INFINITY:
                v = c2 / (1.0 + bb)
                if v < dt:
                    dt = v
            if dt < dt_min:
                dt = dt_min
            last = 0
            if dt >= T - t:
                dt = T - t
                last = 1

            if zpos + d > zcap:
                rem = zcap - zpos
                for q in range(rem):
                    zbuf[q] = zbuf[zpos + q]
                with gil:
                    tmp = gen.standard_normal(zcap - rem)
                    tview = tmp
                    for q in range(zcap - rem):
                        zbuf[rem + q] = tview[q]
                zpos = 0

            sqdt = sqrt(dt)
            # redundant-looking inner loop mirrors the generic engine's
            # row-sum over the (here isotropic) sigma matrix
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    if i == j:
                        acc += sval * (sqdt * zbuf[zpos + j])
                    else:
                        acc += 0.0 * (sqdt * zbuf[zpos + j])
                y[i] = acc
            for i in range(d):
                bdt[i] = b[i] * dt
            for i in range(d):
                xn[i] = x[i] + bdt[i] + y[i]
            tn = T if last else t + dt

            steps += 1
            if steps > max_steps:
                unresolved = 1
                break

            alive = _contains(domain_code, s + tn, xn)
            if alive:
                for i in range(d):
                    x[i] = xn[i]
                t = tn
                if nrec >= cap:
                    status = 1
                    break
                times[nrec] = t
                for i in range(d):
                    states[nrec, i] = x[i]
                dts[nrec - 1] = dt
                if record_dw:
                    for j in range(d):
                        dws[nrec - 1, j] = sqdt * zbuf[zpos + j]
                nrec += 1
                n_incr = nrec - 1
                zpos += d
                if last:
                    break
            else:
                lo = 0.0
                hi = 1.0
                while dt * (hi - lo) > tol_xi:
                    mid = 0.5 * (lo + hi)
                    for i in range(d):
                        xm[i] = x[i] + mid * bdt[i] + mid * y[i]
                    if _contains(domain_code, s + (t + mid * dt), xm):
                        lo = mid
                    else:
                        hi = mid
                xi = t + hi * dt
                killed = 1
                for i in range(d):
                    exit_out[i] = x[i] + hi * bdt[i] + hi * y[i]
                if nrec > cap:  # dts slot nrec-1 needs nrec <= cap
                    status = 1
                    break
                dts[nrec - 1] = hi * dt
                if record_dw:
                    for j in range(d):
                        dws[nrec - 1, j] = hi * (sqdt * zbuf[zpos + j])
                n_incr = nrec
                zpos += d
                break

    scal_out[0] = xi
    scal_out[1] = 1.0 if killed else 0.0
    scal_out[2] = <double> clips
    scal_out[3] = <double> steps
    scal_out[4] = min_ed
    scal_out[5] = 1.0 if unresolved else 0.0
    scal_out[6] = <double> nrec
    scal_out[7] = <double> n_incr
    return status
