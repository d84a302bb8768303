"""Lyapunov-condition checkers, theorem constants, and mixed-norm utilities.

The inequalities checked here are the non-explosion hypotheses:

* drift condition:    2 D_t phi <= K1 phi
* elliptic condition: 2 D_t phi + sum_ij d_j(a_ij d_i phi) <= h e^{eps phi}
* condition (H):      integral over Q of h^r 1_{(0,T)} e^{-a|x|^2} finite

All checks are grid/Monte Carlo estimates, not proofs: a "pass" certifies
the inequality on the sampled points within tolerance.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from .domain import SpaceTimePoint
from .errors import ConfigError, EmptyRegionError, PreconditionError
from .rng import path_stream

__all__ = [
    "TheoremConstants",
    "theorem_constants",
    "LyapunovCertificate",
    "check_drift_condition",
    "check_elliptic_condition",
    "MCValue",
    "h_integral",
    "lp_lq_norm",
]

#: relative slack for pointwise inequality checks on mollified fields
INEQ_TOL = 1e-8

#: cap on the number of violation points stored in a certificate
MAX_VIOLATIONS = 64


@dataclass(frozen=True)
class TheoremConstants:
    """The constants delta, mu, nu of the sub-Gaussian moment bound."""

    epsilon: float
    K1: float
    K: float
    T: float
    delta: float
    mu: float
    nu: float

    def to_json_dict(self):
        return {
            "epsilon": self.epsilon,
            "K1": self.K1,
            "K": self.K,
            "T": self.T,
            "delta": self.delta,
            "mu": self.mu,
            "nu": self.nu,
        }


def theorem_constants(epsilon, K1, K, T):
    """delta = 1/2 - eps/4, mu = (delta/2) e^{-T K1/(2 delta)}, nu = mu/(12 K T)."""
    if not 0.0 <= epsilon < 2.0:
        raise ConfigError("epsilon must lie in [0, 2), got %r" % (epsilon,))
    if K1 < 0.0:
        raise ConfigError("K1 must be nonnegative, got %r" % (K1,))
    if K <= 0.0:
        raise ConfigError("K must be positive, got %r" % (K,))
    if T <= 0.0:
        raise ConfigError("T must be positive, got %r" % (T,))
    delta = 0.5 - epsilon / 4.0
    mu = (delta / 2.0) * math.exp(-T * K1 / (2.0 * delta))
    nu = mu / (12.0 * K * T)
    return TheoremConstants(
        epsilon=float(epsilon), K1=float(K1), K=float(K), T=float(T),
        delta=delta, mu=mu, nu=nu,
    )


@dataclass
class LyapunovCertificate:
    """Result of one inequality check on a grid."""

    inequality: str  # drift-condition | elliptic-condition | condition-H | ...
    verdict: str  # pass | fail | inconclusive
    tightest_constant: Optional[float]
    declared_constant: Optional[float] = None
    declared_feasible: Optional[bool] = None
    violations: List[SpaceTimePoint] = dc_field(default_factory=list)
    n_violations: int = 0
    max_violation: float = 0.0
    grid_resolution: int = 0
    moll_width: Optional[float] = None
    n_points: int = 0
    n_skipped: int = 0
    notes: List[str] = dc_field(default_factory=list)

    def to_json_dict(self):
        return {
            "inequality": self.inequality,
            "verdict": self.verdict,
            "tightest_constant": self.tightest_constant,
            "declared_constant": self.declared_constant,
            "declared_feasible": self.declared_feasible,
            "n_violations": self.n_violations,
            "max_violation": self.max_violation,
            "violations": [
                {"t": p.t, "x": p.x.tolist()} for p in self.violations
            ],
            "grid_resolution": self.grid_resolution,
            "moll_width": self.moll_width,
            "n_points": self.n_points,
            "n_skipped": self.n_skipped,
            "notes": self.notes,
        }


def _region_grid(region, resolution):
    """Midpoint tensor grid over the region's bbox, filtered by membership."""
    t_lo, t_hi, lo, hi = region.bbox()
    if not (
        math.isfinite(t_lo)
        and math.isfinite(t_hi)
        and np.all(np.isfinite(lo))
        and np.all(np.isfinite(hi))
    ):
        raise PreconditionError("checker region must have a finite bounding box")
    res = int(resolution)
    d = region.dim
    ts = t_lo + (np.arange(res) + 0.5) * (t_hi - t_lo) / res
    grids = [lo[i] + (np.arange(res) + 0.5) * (hi[i] - lo[i]) / res for i in range(d)]
    mesh = np.meshgrid(*grids, indexing="ij")
    xs = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    pts = []
    for t in ts:
        for x in xs:
            if region.contains(t, x):
                pts.append((float(t), x))
    if not pts:
        raise EmptyRegionError("no grid point fell inside the region")
    return pts


def check_drift_condition(pot, region, grid_resolution, declared_K1=None):
    """Check 2 D_t phi <= K1 phi on a grid; find the tightest K1.

    Points with phi == 0 and D_t phi > 0 defeat every finite K1 and are
    recorded as violations. When ``declared_K1`` is given the verdict states
    whether the declared constant is feasible on the grid.
    """
    pts = _region_grid(region, grid_resolution)
    tightest = 0.0
    violations = []
    n_viol = 0
    max_viol = 0.0
    for t, x in pts:
        phi = pot.value(t, x)
        lhs = 2.0 * pot.dt(t, x)
        if phi > 0.0:
            tightest = max(tightest, lhs / phi)
        elif lhs > INEQ_TOL:
            n_viol += 1
            max_viol = max(max_viol, lhs)
            if len(violations) < MAX_VIOLATIONS:
                violations.append(SpaceTimePoint(t, x))
    cert = LyapunovCertificate(
        inequality="drift-condition",
        verdict="pass",
        tightest_constant=tightest,
        declared_constant=declared_K1,
        grid_resolution=int(grid_resolution),
        n_points=len(pts),
    )
    if n_viol:
        cert.verdict = "fail"
        cert.violations = violations
        cert.n_violations = n_viol
        cert.max_violation = max_viol
        cert.tightest_constant = None
        cert.notes.append("phi == 0 with D_t phi > 0: no finite K1 works")
        return cert
    if declared_K1 is not None:
        feasible = tightest <= declared_K1 + INEQ_TOL * (1.0 + abs(declared_K1))
        cert.declared_feasible = bool(feasible)
        if not feasible:
            cert.verdict = "fail"
            cert.max_violation = tightest - declared_K1
            viol = []
            for t, x in pts:
                phi = pot.value(t, x)
                lhs = 2.0 * pot.dt(t, x)
                if phi > 0.0 and lhs > declared_K1 * phi + INEQ_TOL * (1.0 + abs(declared_K1 * phi)):
                    cert.n_violations += 1
                    if len(viol) < MAX_VIOLATIONS:
                        viol.append(SpaceTimePoint(t, x))
            cert.violations = viol
    return cert


def _elliptic_lhs(pot, diff, t, x, h):
    """2 D_t phi + sum_j d_j(F_j) with F = a grad(phi), central differences."""

    def flux(y):
        a = diff.a(t, y)
        g = pot.grad(t, y, fd_step=h)
        return a @ g

    d = diff.dim
    div = 0.0
    for j in range(d):
        xp = np.array(x, dtype=np.float64)
        xm = np.array(x, dtype=np.float64)
        xp[j] += h
        xm[j] -= h
        div += (flux(xp)[j] - flux(xm)[j]) / (2.0 * h)
    return 2.0 * pot.dt(t, x) + div


def check_elliptic_condition(pot, diff, region, grid_resolution, moll_width,
                             domain=None, h_field=None, epsilon=None):
    """Check the elliptic Lyapunov inequality on a grid with mollified FD.

    ``h_field``/``epsilon`` default to the potential's declared Lyapunov
    data. When no h is declared the checker reports the tightest constant
    C = max LHS * e^{-eps phi} that would make h == C pass, with verdict
    "pass" (the inequality is satisfiable by a constant on the grid) unless
    the LHS is unbounded on the sampled points.

    Grid points whose stencil does not fit inside the domain (clearance
    below 2 * moll_width) are skipped and counted; if more than 10% of the
    grid is skipped the verdict is "inconclusive".
    """
    if epsilon is None:
        epsilon = pot.epsilon
    if not 0.0 <= epsilon < 2.0:
        raise ConfigError("epsilon must lie in [0, 2), got %r" % (epsilon,))
    if h_field is None:
        h_field = pot.h
    pts = _region_grid(region, grid_resolution)
    h = float(moll_width)

    kept = []
    n_skipped = 0
    for t, x in pts:
        if domain is not None:
            try:
                clear = domain.boundary_distance((t, x))
            except PreconditionError:
                n_skipped += 1
                continue
            if clear < 2.0 * h:
                n_skipped += 1
                continue
        kept.append((t, x))

    tightest = 0.0
    violations = []
    n_viol = 0
    max_viol = 0.0
    n_eval = 0
    for t, x in kept:
        try:
            lhs = _elliptic_lhs(pot, diff, t, x, h)
        except (FloatingPointError, ZeroDivisionError):
            n_skipped += 1
            continue
        if not math.isfinite(lhs):
            n_skipped += 1
            continue
        n_eval += 1
        phi = pot.value(t, x)
        tightest = max(tightest, lhs * math.exp(-epsilon * phi))
        if h_field is not None:
            hv = float(h_field(t, x)) if callable(h_field) else float(h_field)
            rhs = hv * math.exp(epsilon * phi)
            slack = lhs - rhs
            if slack > INEQ_TOL * (1.0 + abs(rhs)):
                n_viol += 1
                max_viol = max(max_viol, slack)
                if len(violations) < MAX_VIOLATIONS:
                    violations.append(SpaceTimePoint(t, x))

    cert = LyapunovCertificate(
        inequality="elliptic-condition",
        verdict="pass",
        tightest_constant=tightest if math.isfinite(tightest) else None,
        declared_constant=(
            None if h_field is None or callable(h_field) else float(h_field)
        ),
        violations=violations,
        n_violations=n_viol,
        max_violation=max_viol,
        grid_resolution=int(grid_resolution),
        moll_width=h,
        n_points=len(pts),
        n_skipped=n_skipped,
    )
    if n_eval == 0:
        cert.verdict = "inconclusive"
        cert.notes.append("all grid points skipped")
        return cert
    if n_skipped > 0.10 * len(pts):
        cert.verdict = "inconclusive"
        cert.notes.append(
            "skipped %d of %d grid points (> 10%%)" % (n_skipped, len(pts))
        )
        return cert
    if n_viol:
        cert.verdict = "fail"
    if h_field is not None and n_viol == 0:
        cert.declared_feasible = True
    elif h_field is not None:
        cert.declared_feasible = False
    return cert


@dataclass(frozen=True)
class MCValue:
    """A Monte Carlo scalar: estimate, standard error, sample count."""

    estimate: float
    std_error: float
    n_samples: int
    seed: int
    warnings: tuple = ()

    def to_json_dict(self):
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "warnings": list(self.warnings),
        }


def h_integral(h, domain, T, a, r, n_samples, seed):
    """Importance-sampled estimate of the condition-(H) integral.

    Integral over Q of h^r(t,x) 1_{(0,T)}(t) e^{-a |x|^2} dt dx, estimated
    with proposal Uniform(0,T) x Gaussian(0, I/(2a)) and indicator weights
    for membership in Q. The Gaussian proposal matches the e^{-a|x|^2}
    factor exactly, so a constant h has zero variance up to the indicator.
    """
    if a <= 0.0 or T <= 0.0:
        raise ConfigError("h_integral requires a > 0 and T > 0")
    if r <= 0.0:
        raise ConfigError("h_integral requires r > 0")
    d = domain.dim
    rng = path_stream(seed, 0, family=7)
    ts = rng.uniform(0.0, T, size=n_samples)
    xs = rng.standard_normal((n_samples, d)) / math.sqrt(2.0 * a)
    scale = T * (math.pi / a) ** (d / 2.0)
    vals = np.zeros(n_samples)
    for k in range(n_samples):
        if domain.contains((ts[k], xs[k])):
            hv = float(h(ts[k], xs[k])) if callable(h) else float(h)
            vals[k] = abs(hv) ** r
    vals *= scale
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    warnings = ()
    if est > 0.0 and se > est:
        warnings = ("standard error exceeds the estimate; integrand may diverge",)
    return MCValue(est, se, int(n_samples), int(seed), warnings)


def lp_lq_norm(f, S, T, box_lo, box_hi, p, q, grid_resolution=128):
    """Midpoint tensor-grid approximation of the mixed (p, q) norm.

    ( integral_S^T ( integral_box |f(t,x)|^p dx )^{q/p} dt )^{1/q}
    with f truncated to the given spatial box.
    """
    if not S < T:
        raise PreconditionError("lp_lq_norm requires S < T")
    if p < 1.0 or q < 1.0:
        raise PreconditionError("lp_lq_norm requires p, q >= 1")
    lo = np.asarray(box_lo, dtype=np.float64).reshape(-1)
    hi = np.asarray(box_hi, dtype=np.float64).reshape(-1)
    if lo.shape != hi.shape or np.any(lo >= hi):
        raise PreconditionError("invalid truncation box")
    d = lo.shape[0]
    res = int(grid_resolution)
    ts = S + (np.arange(res) + 0.5) * (T - S) / res
    dt = (T - S) / res
    grids = [lo[i] + (np.arange(res) + 0.5) * (hi[i] - lo[i]) / res for i in range(d)]
    cell = float(np.prod((hi - lo) / res))
    mesh = np.meshgrid(*grids, indexing="ij")
    xs = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    acc_t = 0.0
    for t in ts:
        inner = 0.0
        for x in xs:
            inner += abs(float(f(t, x))) ** p * cell
        acc_t += inner ** (q / p) * dt
    return acc_t ** (1.0 / q)
