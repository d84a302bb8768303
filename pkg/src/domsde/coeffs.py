"""Coefficient fields and the gradient-type drift assembly.

Provides drift/diffusion/potential containers, the divergence correction
(1/2) sum_j d_j a_ij that turns -a grad(phi) into the divergence-form drift,
smooth cutoffs between nested regions, the localization construction that
extends coefficients from an exhaustion level to all of space, and grid
ellipticity estimates.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domain import SpaceTimePoint, as_point
from .errors import (
    EmptyRegionError,
    PreconditionError,
    SingularityError,
    StencilError,
)

__all__ = [
    "DiffusionField",
    "PotentialField",
    "CoefficientSet",
    "divergence_correction",
    "build_gradient_drift",
    "gradient_drift_function",
    "localize",
    "smooth_cutoff",
    "ellipticity_bounds",
    "default_fd_step",
]


def default_fd_step(clearance=None):
    """Default stencil width: max(1e-5, 1e-4 * boundary clearance)."""
    if clearance is None or not math.isfinite(clearance):
        return 1e-5
    return max(1e-5, 1e-4 * clearance)


@dataclass(frozen=True)
class DiffusionField:
    """The diffusion coefficient sigma(t, x), a d x d matrix field.

    ``jacobian`` (optional) returns the third-order array J[k, i, j] =
    d_k sigma_ij; when present, derivative quantities are exact instead of
    finite-differenced.
    """

    dim: int
    sigma: Callable[[float, np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    label: str = "sigma"

    def __call__(self, t, x):
        return np.asarray(self.sigma(t, x), dtype=np.float64).reshape(self.dim, self.dim)

    def a(self, t, x):
        """a = sigma sigma* at (t, x)."""
        s = self(t, x)
        return s @ s.T

    def grad_a(self, t, x, fd_step):
        """G[k, i, j] = d_k a_ij, analytic via the jacobian if present."""
        d = self.dim
        if self.jacobian is not None:
            s = self(t, x)
            js = np.asarray(self.jacobian(t, x), dtype=np.float64).reshape(d, d, d)
            out = np.empty((d, d, d))
            for k in range(d):
                ds = js[k]
                out[k] = ds @ s.T + s @ ds.T
            return out
        x = np.asarray(x, dtype=np.float64)
        out = np.empty((d, d, d))
        for k in range(d):
            xp = x.copy()
            xm = x.copy()
            xp[k] += fd_step
            xm[k] -= fd_step
            ap = self.a(t, xp)
            am = self.a(t, xm)
            if not (np.all(np.isfinite(ap)) and np.all(np.isfinite(am))):
                raise StencilError(
                    "diffusion not finite on the stencil at (%g, %s)" % (t, x),
                    required_clearance=fd_step,
                )
            out[k] = (ap - am) / (2.0 * fd_step)
        return out


@dataclass(frozen=True)
class PotentialField:
    """A Lyapunov potential phi >= 0 with optional analytic derivatives.

    ``h``, ``epsilon``, ``K1`` are the Lyapunov data of the elliptic and
    drift conditions: 2 D_t phi <= K1 phi and
    2 D_t phi + sum_ij d_j(a_ij d_i phi) <= h e^{epsilon phi}.
    ``h`` may be a callable field, a constant, or None (constant to be
    estimated by the checker).
    """

    dim: int
    phi: Callable[[float, np.ndarray], float]
    grad_phi: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    dt_phi: Optional[Callable[[float, np.ndarray], float]] = None
    h: object = None
    epsilon: float = 0.0
    K1: float = 0.0
    label: str = "phi"

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 2.0:
            raise PreconditionError(
                "epsilon must lie in [0, 2), got %r" % (self.epsilon,)
            )
        if self.K1 < 0.0:
            raise PreconditionError("K1 must be nonnegative")

    def value(self, t, x):
        return float(self.phi(t, np.asarray(x, dtype=np.float64)))

    def grad(self, t, x, fd_step=1e-5):
        x = np.asarray(x, dtype=np.float64)
        if self.grad_phi is not None:
            return np.asarray(self.grad_phi(t, x), dtype=np.float64).reshape(self.dim)
        g = np.empty(self.dim)
        for k in range(self.dim):
            xp = x.copy()
            xm = x.copy()
            xp[k] += fd_step
            xm[k] -= fd_step
            g[k] = (self.phi(t, xp) - self.phi(t, xm)) / (2.0 * fd_step)
        return g

    def dt(self, t, x, fd_step=1e-6):
        if self.dt_phi is not None:
            return float(self.dt_phi(t, np.asarray(x, dtype=np.float64)))
        x = np.asarray(x, dtype=np.float64)
        tm = max(t - fd_step, 0.0)
        tp = t + fd_step
        return (self.phi(tp, x) - self.phi(tm, x)) / (tp - tm)

    def h_value(self, t, x):
        if self.h is None:
            return None
        if callable(self.h):
            return float(self.h(t, np.asarray(x, dtype=np.float64)))
        return float(self.h)


@dataclass(frozen=True)
class CoefficientSet:
    """Drift + diffusion (+ optional potential) defining one SDE.

    ``provenance`` records whether the drift was given directly or assembled
    from a potential per the gradient-type form; gradient-type sets keep
    their potential so diagnostics can evaluate phi along paths.
    ``extra_drift`` is the optional additional bounded drift term; the
    stored ``drift`` already includes it, and the decomposition invariant is
    drift - extra_drift == -a grad(phi) + divergence correction.
    ``k_est`` is an upper ellipticity estimate for a = sigma sigma*, used
    only for step-size control.
    """

    dim: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: DiffusionField
    provenance: str = "direct"
    potential: Optional[PotentialField] = None
    extra_drift: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    k_est: float = 1.0

    def __post_init__(self):
        if self.provenance not in ("direct", "gradient-type"):
            raise PreconditionError("provenance must be direct or gradient-type")
        if self.provenance == "gradient-type" and self.potential is None:
            raise PreconditionError("gradient-type sets must record their potential")

    def drift_at(self, t, x):
        return np.asarray(self.drift(t, x), dtype=np.float64).reshape(self.dim)

    def sigma_at(self, t, x):
        return self.diffusion(t, x)


def divergence_correction(diff, p, fd_step, clearance=None):
    """The vector with components (1/2) sum_j d_j a_ij at p.

    Uses the analytic jacobian when the field declares one, otherwise
    central differences of a = sigma sigma* with the given stencil width.
    ``clearance``, when supplied, is the available distance to the boundary;
    a stencil wider than the clearance raises StencilError.
    """
    p = as_point(p, diff.dim)
    if clearance is not None and fd_step >= clearance:
        raise StencilError(
            "stencil width %g does not fit in clearance %g" % (fd_step, clearance),
            required_clearance=fd_step,
        )
    grad = diff.grad_a(p.t, p.x, fd_step)
    d = diff.dim
    out = np.empty(d)
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += grad[j, i, j]
        out[i] = 0.5 * acc
    return out


def build_gradient_drift(pot, diff, p, fd_step=None, clearance=None):
    """Drift of the gradient-type SDE at p: -(sigma sigma*) grad(phi) + correction."""
    p = as_point(p, diff.dim)
    if fd_step is None:
        fd_step = default_fd_step(clearance)
    g = pot.grad(p.t, p.x, fd_step=fd_step)
    if not np.all(np.isfinite(g)):
        raise SingularityError("grad(phi) not finite at %r" % (p,), point=p)
    a = diff.a(p.t, p.x)
    return -(a @ g) + divergence_correction(diff, p, fd_step, clearance=clearance)


def gradient_drift_function(pot, diff, fd_step=None, extra_drift=None):
    """Assemble a drift callable from a potential and a diffusion field."""

    def drift(t, x):
        b = build_gradient_drift(pot, diff, (t, x), fd_step=fd_step)
        if extra_drift is not None:
            b = b + np.asarray(extra_drift(t, x), dtype=np.float64)
        return b

    return drift


def _smoothstep(u):
    return u * u * u * (10.0 + u * (6.0 * u - 15.0))


def smooth_cutoff(inner, outer, p):
    """C1 cutoff: 1 on ``inner``, 0 outside ``outer``, smoothstep between.

    The transition coordinate is u = D_out / (D_out + D_in) where D_out is
    the distance to the outer region's boundary and D_in the distance to the
    inner region; requires closure(inner) contained in outer.
    """
    p = as_point(p, inner.dim)
    if inner.contains(p.t, p.x):
        return 1.0
    if not outer.contains(p.t, p.x):
        return 0.0
    d_in = inner.distance_to(p.t, p.x)
    d_out = outer.distance_inside(p.t, p.x)
    if d_in == 0.0:
        return 1.0
    if d_out == 0.0:
        return 0.0
    return _smoothstep(d_out / (d_out + d_in))


def _sup_sigma_estimate(diff, region, grid_per_axis=32, safety=1.05):
    """Estimated sup of |sigma| (Frobenius) over a region, with safety factor."""
    t_lo, t_hi, lo, hi = region.bbox()
    d = region.dim
    n_axes = d + 1
    best = 0.0
    found = False
    if n_axes <= 3:
        ts = np.linspace(t_lo, t_hi, grid_per_axis)
        grids = [np.linspace(lo[i], hi[i], grid_per_axis) for i in range(d)]
        mesh = np.meshgrid(*grids, indexing="ij") if d > 0 else []
        pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        for t in ts:
            for x in pts:
                if region.in_closure(t, x):
                    found = True
                    best = max(best, float(np.linalg.norm(diff(t, x))))
    else:
        rng = np.random.Generator(
            np.random.Philox(key=np.array([0x51D0, 0], dtype=np.uint64))
        )
        n = grid_per_axis ** 3
        ts = rng.uniform(t_lo, t_hi, size=n)
        xs = rng.uniform(lo, hi, size=(n, d))
        for t, x in zip(ts, xs):
            if region.in_closure(t, x):
                found = True
                best = max(best, float(np.linalg.norm(diff(t, x))))
    if not found:
        raise EmptyRegionError("no grid point fell inside the region")
    return best * safety


def localize(coeffs, domain, n, s=0.0):
    """Global coefficients agreeing with the originals on Q^n.

    Returns a CoefficientSet defined on all of R+ x R^d:

    * drift(t, x)    = chi_n(t+s, x) * b(t+s, x)
    * diffusion(t,x) = chi_{n+1}(t+s, x) * sigma(t+s, x)
                       + (1 - chi_n(t+s, x)) * (1 + sup|sigma| over Q^{n+2}) * I

    where chi_m is the smooth cutoff that is 1 on Q^m and 0 outside Q^{m+1}.
    On Q^n both factors are exactly 1 (resp. the complement weight exactly
    0), so the localized evaluations are bit-identical to the originals
    there. Outside Q^{n+1} the drift vanishes and the diffusion is the
    constant elliptic matrix c*I.

    The step-control estimate ``k_est`` is carried over unchanged so that
    step-size sequences agree with the original model's while paths remain
    in Q^n.
    """
    if n < 1:
        raise PreconditionError("localization level must be >= 1")
    inner = domain.exhaustion_level(n)
    mid = domain.exhaustion_level(n + 1)
    outer = domain.exhaustion_level(n + 2)
    c = 1.0 + _sup_sigma_estimate(coeffs.diffusion, outer)
    d = coeffs.dim
    eye = np.eye(d)

    def chi_n(t, x):
        return smooth_cutoff(inner, mid, (t, x))

    def chi_n1(t, x):
        return smooth_cutoff(mid, outer, (t, x))

    def drift(t, x):
        w = chi_n(t + s, x)
        if w == 0.0:
            return np.zeros(d)
        return w * coeffs.drift_at(t + s, x)

    def sigma(t, x):
        w1 = chi_n1(t + s, x)
        w0 = 1.0 - chi_n(t + s, x)
        if w1 == 0.0:
            return c * eye
        return w1 * coeffs.sigma_at(t + s, x) + (w0 * c) * eye

    return CoefficientSet(
        dim=d,
        drift=drift,
        diffusion=DiffusionField(dim=d, sigma=sigma, label="localized-sigma"),
        provenance="direct",
        potential=None,
        k_est=coeffs.k_est,
    )


def ellipticity_bounds(diff, region, grid_resolution):
    """(min, max) eigenvalue of sigma sigma* over a tensor grid in the region.

    The grid spans the bounding box inclusively and keeps points in the
    region's closure, so extremes attained on the boundary are captured.
    """
    t_lo, t_hi, lo, hi = region.bbox()
    if not (
        math.isfinite(t_lo)
        and math.isfinite(t_hi)
        and np.all(np.isfinite(lo))
        and np.all(np.isfinite(hi))
    ):
        raise PreconditionError("ellipticity_bounds requires a finite bounding box")
    res = int(grid_resolution)
    d = region.dim
    ts = np.linspace(t_lo, t_hi, res)
    grids = [np.linspace(lo[i], hi[i], res) for i in range(d)]
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    lo_eig = math.inf
    hi_eig = -math.inf
    found = False
    for t in ts:
        for x in pts:
            if not region.in_closure(t, x):
                continue
            found = True
            w = np.linalg.eigvalsh(diff.a(t, x))
            lo_eig = min(lo_eig, float(w[0]))
            hi_eig = max(hi_eig, float(w[-1]))
    if not found:
        raise EmptyRegionError("no grid point fell inside the region")
    return lo_eig, hi_eig
