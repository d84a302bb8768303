"""Space-time domains Q in R+ x R^d with exhausting sequences.

A domain is the open set on which the SDE lives; leaving it kills the path.
Each domain provides

* ``contains`` -- the membership predicate, the primitive everything uses;
* ``exhaustion_level(n)`` -- bounded regions Q^n with closure(Q^n) in Q^{n+1}
  and union Q, the scaffold for localization and run counting;
* ``boundary_distance`` -- a certified lower bound on the Euclidean distance
  in R^{d+1} to the boundary of Q;
* ``exit_distance`` -- the distance restricted to boundary faces a path
  moving forward in time can actually reach (used for step-size control;
  the t=0 face is unreachable and would otherwise stall paths started at
  small times).

Time convention: domains are relatively open in [0, inf) x R^d, so points
with t = 0 belong to Q whenever their spatial part does (starts at s = 0 are
legal). ``boundary_distance`` nevertheless counts the t=0 face, which keeps
it a valid lower bound. Exhaustion regions use the half-open time bracket
[0, n) so that the closure-nesting property holds in the relative topology.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, PreconditionError

__all__ = [
    "SpaceTimePoint",
    "CEMETERY",
    "CompactifiedState",
    "Region",
    "ProductRegion",
    "TimeBall",
    "FuncRegion",
    "Interval",
    "AbsShell",
    "SpaceTimeDomain",
    "full_space",
    "half_space",
    "box_domain",
    "punctured_plane",
    "punctured_space",
    "collision_free",
    "from_predicate",
    "contains",
    "exhaustion_level",
    "which_level",
    "boundary_distance",
]


class SpaceTimePoint:
    """A point (t, x) with t >= 0 and x in R^d."""

    __slots__ = ("t", "x")

    def __init__(self, t, x):
        t = float(t)
        if t < 0.0:
            raise PreconditionError("SpaceTimePoint requires t >= 0, got %r" % t)
        self.t = t
        self.x = np.asarray(x, dtype=np.float64).reshape(-1)

    @property
    def dim(self):
        return self.x.shape[0]

    def __iter__(self):
        yield self.t
        yield self.x

    def __repr__(self):
        return "SpaceTimePoint(t=%g, x=%s)" % (self.t, np.array2string(self.x))

    def __eq__(self, other):
        if not isinstance(other, SpaceTimePoint):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.x, other.x)


def as_point(p, dim=None):
    """Normalize (t, x) pairs or SpaceTimePoints; check dimension if given."""
    if not isinstance(p, SpaceTimePoint):
        t, x = p
        p = SpaceTimePoint(t, x)
    if dim is not None and p.dim != dim:
        raise DimensionMismatchError(
            "point has dimension %d, expected %d" % (p.dim, dim)
        )
    return p


class _Cemetery:
    """The added point of the one-point compactification."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "CEMETERY"


CEMETERY = _Cemetery()


@dataclass(frozen=True)
class CompactifiedState:
    """Either a SpaceTimePoint of Q or the cemetery symbol.

    The cemetery is absorbing: ``advance`` from a cemetery state returns the
    cemetery state no matter what is proposed.
    """

    value: object  # SpaceTimePoint or CEMETERY

    @property
    def is_cemetery(self):
        return self.value is CEMETERY

    def advance(self, proposed):
        """Transition to ``proposed`` unless already absorbed."""
        if self.is_cemetery:
            return self
        if isinstance(proposed, CompactifiedState):
            return proposed
        return CompactifiedState(proposed)


# ---------------------------------------------------------------------------
# one-dimensional factor sets for product regions


class Interval:
    """Open interval lo < x < hi; either bound may be infinite."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = float(lo)
        self.hi = float(hi)

    def contains(self, x):
        return self.lo < x < self.hi

    def distance_inside(self, x):
        d = math.inf
        if math.isfinite(self.lo):
            d = min(d, x - self.lo)
        if math.isfinite(self.hi):
            d = min(d, self.hi - x)
        return d

    def gap(self, x):
        return max(self.lo - x, x - self.hi, 0.0)

    def bounds(self):
        return self.lo, self.hi


class AbsShell:
    """Symmetric shell lo < |x| < hi in one coordinate."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = float(lo)
        self.hi = float(hi)

    def contains(self, x):
        return self.lo < abs(x) < self.hi

    def distance_inside(self, x):
        u = abs(x)
        d = u - self.lo
        if math.isfinite(self.hi):
            d = min(d, self.hi - u)
        return d

    def gap(self, x):
        u = abs(x)
        return max(self.lo - u, u - self.hi, 0.0)

    def bounds(self):
        return -self.hi, self.hi


# ---------------------------------------------------------------------------
# region descriptors


class Region:
    """A bounded space-time region: predicate + finite bounding box.

    ``distance_inside`` is the distance from an interior point to the
    region's boundary (0 outside); ``distance_to`` is a lower bound on the
    distance from an exterior point to the region's closure (0 on the
    closure), which is what closure-membership tests use.
    """

    dim = None

    def contains(self, t, x):
        raise NotImplementedError

    def distance_inside(self, t, x):
        raise NotImplementedError

    def distance_to(self, t, x):
        raise NotImplementedError

    def contains_point(self, p):
        p = as_point(p, self.dim)
        return self.contains(p.t, p.x)

    def in_closure(self, t, x):
        return self.distance_to(t, x) == 0.0

    def bbox(self):
        """Return (t_lo, t_hi, lo, hi) with lo/hi arrays of length dim."""
        raise NotImplementedError

    def sample(self, rng, n, max_tries=200):
        """Rejection-sample n points from the region via its bounding box."""
        t_lo, t_hi, lo, hi = self.bbox()
        if not (
            math.isfinite(t_lo)
            and math.isfinite(t_hi)
            and np.all(np.isfinite(lo))
            and np.all(np.isfinite(hi))
        ):
            raise PreconditionError("cannot sample a region with infinite bbox")
        out = []
        for _ in range(max_tries):
            m = max(2 * (n - len(out)), 16)
            ts = rng.uniform(t_lo, t_hi, size=m)
            xs = rng.uniform(lo, hi, size=(m, len(lo)))
            for k in range(m):
                if self.contains(ts[k], xs[k]):
                    out.append(SpaceTimePoint(ts[k], xs[k]))
                    if len(out) == n:
                        return out
        raise PreconditionError(
            "rejection sampling found only %d/%d points" % (len(out), n)
        )


class ProductRegion(Region):
    """Time interval times a product of one-dimensional factor sets.

    The time bracket is half-open [t_lo, t_hi) when ``closed_t_lo`` is set
    (used for exhaustion members of domains whose time axis starts at 0, so
    the t=0 slice is not treated as a boundary face).
    """

    def __init__(self, t_lo, t_hi, axes, closed_t_lo=None):
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.axes = list(axes)
        self.dim = len(self.axes)
        if closed_t_lo is None:
            closed_t_lo = self.t_lo == 0.0
        self.closed_t_lo = bool(closed_t_lo)

    def contains(self, t, x):
        if self.closed_t_lo:
            if not (self.t_lo <= t < self.t_hi):
                return False
        elif not (self.t_lo < t < self.t_hi):
            return False
        for ax, xi in zip(self.axes, x):
            if not ax.contains(xi):
                return False
        return True

    def distance_inside(self, t, x):
        if not self.contains(t, x):
            return 0.0
        d = self.t_hi - t
        if not self.closed_t_lo:
            d = min(d, t - self.t_lo)
        for ax, xi in zip(self.axes, x):
            d = min(d, ax.distance_inside(xi))
        return d

    def distance_to(self, t, x):
        g2 = max(self.t_lo - t, t - self.t_hi, 0.0) ** 2
        for ax, xi in zip(self.axes, x):
            g2 += ax.gap(xi) ** 2
        return math.sqrt(g2)

    def bbox(self):
        lo = np.array([ax.bounds()[0] for ax in self.axes])
        hi = np.array([ax.bounds()[1] for ax in self.axes])
        return self.t_lo, self.t_hi, lo, hi


class TimeBall(Region):
    """Time interval times an open Euclidean ball of given radius."""

    def __init__(self, t_lo, t_hi, radius, dim, closed_t_lo=None):
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.radius = float(radius)
        self.dim = int(dim)
        if closed_t_lo is None:
            closed_t_lo = self.t_lo == 0.0
        self.closed_t_lo = bool(closed_t_lo)

    def contains(self, t, x):
        if self.closed_t_lo:
            if not (self.t_lo <= t < self.t_hi):
                return False
        elif not (self.t_lo < t < self.t_hi):
            return False
        return float(np.dot(x, x)) < self.radius * self.radius

    def distance_inside(self, t, x):
        if not self.contains(t, x):
            return 0.0
        d = self.t_hi - t
        if not self.closed_t_lo:
            d = min(d, t - self.t_lo)
        return min(d, self.radius - math.sqrt(float(np.dot(x, x))))

    def distance_to(self, t, x):
        gt = max(self.t_lo - t, t - self.t_hi, 0.0)
        gr = max(math.sqrt(float(np.dot(x, x))) - self.radius, 0.0)
        return math.hypot(gt, gr)

    def bbox(self):
        lo = np.full(self.dim, -self.radius)
        hi = np.full(self.dim, self.radius)
        return self.t_lo, self.t_hi, lo, hi


class FuncRegion(Region):
    """Time interval times (ball of radius R intersected {clear_fn > c}).

    ``clear_fn(x)`` must be a 1-Lipschitz clearance function (a distance to
    some excluded set); the region keeps points with clearance strictly
    above ``clearance``. Used for punctured-space and collision-free
    exhaustions and for predicate-only domains (where the clearance is a
    conservative ray-probe estimate).
    """

    def __init__(self, t_lo, t_hi, radius, dim, clear_fn, clearance,
                 extra_pred=None, closed_t_lo=None):
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.radius = float(radius)
        self.dim = int(dim)
        self.clear_fn = clear_fn
        self.clearance = float(clearance)
        self.extra_pred = extra_pred
        if closed_t_lo is None:
            closed_t_lo = self.t_lo == 0.0
        self.closed_t_lo = bool(closed_t_lo)

    def contains(self, t, x):
        if self.closed_t_lo:
            if not (self.t_lo <= t < self.t_hi):
                return False
        elif not (self.t_lo < t < self.t_hi):
            return False
        if float(np.dot(x, x)) >= self.radius * self.radius:
            return False
        if self.extra_pred is not None and not self.extra_pred(t, x):
            return False
        return self.clear_fn(t, x) > self.clearance

    def distance_inside(self, t, x):
        if not self.contains(t, x):
            return 0.0
        d = self.t_hi - t
        if not self.closed_t_lo:
            d = min(d, t - self.t_lo)
        d = min(d, self.radius - math.sqrt(float(np.dot(x, x))))
        return min(d, self.clear_fn(t, x) - self.clearance)

    def distance_to(self, t, x):
        # max of per-constraint deficits: a lower bound on the true distance
        gt = max(self.t_lo - t, t - self.t_hi, 0.0)
        gr = max(math.sqrt(float(np.dot(x, x))) - self.radius, 0.0)
        gc = max(self.clearance - self.clear_fn(t, x), 0.0)
        return max(gt, gr, gc)

    def bbox(self):
        lo = np.full(self.dim, -self.radius)
        hi = np.full(self.dim, self.radius)
        return self.t_lo, self.t_hi, lo, hi


# ---------------------------------------------------------------------------
# ray probing for predicate-only domains


def _probe_directions(dim, n_random=16):
    """Spatial probe directions: +-axes plus fixed pseudo-random units."""
    dirs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        dirs.append(e.copy())
        e[i] = -1.0
        dirs.append(e.copy())
    rng = np.random.Generator(np.random.Philox(key=np.array([0x9E3779B9, 0],
                                                            dtype=np.uint64)))
    k = 0
    while k < n_random:
        v = rng.standard_normal(dim)
        nv = float(np.linalg.norm(v))
        if nv > 1e-6:
            dirs.append(v / nv)
            k += 1
    return dirs


def _ray_exit(pred, t, x, direction, r_max, n_march=64, n_bisect=40):
    """First radius along a spatial ray at which ``pred`` fails.

    Returns r_max when no exit is found within the ray horizon (a lower
    bound up to ray coverage).
    """
    prev = 0.0
    for k in range(1, n_march + 1):
        r = r_max * k / n_march
        if not pred(t, x + r * direction):
            lo, hi = prev, r
            for _ in range(n_bisect):
                mid = 0.5 * (lo + hi)
                if pred(t, x + mid * direction):
                    lo = mid
                else:
                    hi = mid
            return hi
        prev = r
    return r_max


def _probe_distance(pred, t, x, r_max, directions):
    return min(_ray_exit(pred, t, x, u, r_max) for u in directions)


# ---------------------------------------------------------------------------
# domains


class SpaceTimeDomain:
    """An open space-time domain Q, its exhaustion, and distance queries.

    Immutable after construction; safe to share across workers. Subclasses
    implement ``_spatial_contains``, ``_spatial_distance`` (distance from an
    inside point to the spatial part of boundary Q, +inf if none) and
    ``exhaustion_level``.
    """

    #: kernel dispatch code; None means the compiled lane cannot handle it
    kind_code = None

    def __init__(self, dim, name, params=None, time_hi=math.inf):
        self.dim = int(dim)
        self.name = str(name)
        self.params = dict(params or {})
        self.time_hi = float(time_hi)

    # -- membership -------------------------------------------------------

    def contains(self, p):
        p = as_point(p, self.dim)
        if p.t < 0.0 or p.t >= self.time_hi:
            return False
        return self._spatial_contains(p.t, p.x)

    def _spatial_contains(self, t, x):
        raise NotImplementedError

    # -- distances --------------------------------------------------------

    def boundary_distance(self, p):
        """Certified lower bound on dist((t,x), boundary Q) in R^{d+1}.

        Counts the t=0 face (conservative: that face is never an exit).
        Raises if the point is outside Q.
        """
        p = as_point(p, self.dim)
        if not self.contains(p):
            raise PreconditionError("boundary_distance: point not in Q: %r" % p)
        return min(p.t, self.exit_distance(p))

    def exit_distance(self, p):
        """Distance to boundary faces reachable by forward time motion."""
        p = as_point(p, self.dim)
        d = self._spatial_distance(p.t, p.x)
        if math.isfinite(self.time_hi):
            d = min(d, self.time_hi - p.t)
        return d

    def _spatial_distance(self, t, x):
        raise NotImplementedError

    # -- exhaustion ---------------------------------------------------------

    def exhaustion_level(self, n):
        """Region descriptor for Q^n (n >= 1)."""
        raise NotImplementedError

    def which_level(self, p, n_max):
        """Smallest n <= n_max with p in Q^n, or None."""
        p = as_point(p, self.dim)
        if not self.contains(p):
            raise PreconditionError("which_level: point not in Q: %r" % p)
        for n in range(1, int(n_max) + 1):
            if self.exhaustion_level(n).contains(p.t, p.x):
                return n
        return None

    def __repr__(self):
        return "SpaceTimeDomain(%r, dim=%d)" % (self.name, self.dim)


class _FullSpace(SpaceTimeDomain):
    kind_code = 0

    def __init__(self, dim):
        super().__init__(dim, "full-space", {"dim": dim})

    def _spatial_contains(self, t, x):
        return True

    def _spatial_distance(self, t, x):
        return math.inf

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        return TimeBall(0.0, float(n), float(n), self.dim)


class _HalfSpace(SpaceTimeDomain):
    """Q = R+ x {x_axis > 0} (the half-line when dim == 1)."""

    def __init__(self, dim=1, axis=0):
        super().__init__(dim, "half-space", {"dim": dim, "axis": axis})
        self.axis = int(axis)
        if dim == 1:
            self.kind_code = 1

    def _spatial_contains(self, t, x):
        return x[self.axis] > 0.0

    def _spatial_distance(self, t, x):
        return float(x[self.axis])

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        axes = []
        for i in range(self.dim):
            if i == self.axis:
                axes.append(Interval(1.0 / n, float(n)))
            else:
                axes.append(Interval(-float(n), float(n)))
        return ProductRegion(0.0, float(n), axes)


class _BoxDomain(SpaceTimeDomain):
    """Q = [0, t_hi) x product of open intervals (slab when some are infinite)."""

    def __init__(self, lo, hi, time_hi=math.inf):
        lo = np.asarray(lo, dtype=np.float64).reshape(-1)
        hi = np.asarray(hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box lo/hi shapes differ")
        if np.any(lo >= hi):
            raise PreconditionError("box requires lo < hi on every axis")
        super().__init__(
            lo.shape[0],
            "box",
            {"lo": lo.tolist(), "hi": hi.tolist(), "time_hi": time_hi},
            time_hi=time_hi,
        )
        self.lo = lo
        self.hi = hi

    def _spatial_contains(self, t, x):
        return bool(np.all(x > self.lo) and np.all(x < self.hi))

    def _spatial_distance(self, t, x):
        d = math.inf
        for i in range(self.dim):
            if math.isfinite(self.lo[i]):
                d = min(d, x[i] - self.lo[i])
            if math.isfinite(self.hi[i]):
                d = min(d, self.hi[i] - x[i])
        return d

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        shrink = 1.0 / n
        axes = []
        for i in range(self.dim):
            lo = self.lo[i] + shrink if math.isfinite(self.lo[i]) else -float(n)
            hi = self.hi[i] - shrink if math.isfinite(self.hi[i]) else float(n)
            lo, hi = max(lo, -float(n)), min(hi, float(n))
            axes.append(Interval(lo, min(hi, float(n))))
        t_hi = min(float(n), self.time_hi - shrink)
        return ProductRegion(0.0, t_hi, axes)


class _PuncturedPlane(SpaceTimeDomain):
    """Q = R+ x (R^2 minus the hyperplane {x1 = 0})."""

    kind_code = 2

    def __init__(self):
        super().__init__(2, "punctured-plane", {})

    def _spatial_contains(self, t, x):
        return x[0] != 0.0

    def _spatial_distance(self, t, x):
        return abs(float(x[0]))

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        return ProductRegion(
            0.0,
            float(n),
            [AbsShell(1.0 / n, float(n)), Interval(-float(n), float(n))],
        )


class _PuncturedSpace(SpaceTimeDomain):
    """Q = R+ x {x: dist(x, centers) > rho} (random-media hard cores)."""

    def __init__(self, dim, centers, rho):
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, dim)
        super().__init__(
            dim,
            "punctured-space",
            {"dim": dim, "n_centers": int(centers.shape[0]), "rho": float(rho)},
        )
        self.centers = centers
        self.rho = float(rho)

    def clearance(self, x):
        """dist(x, centers) - rho; positive inside Q."""
        if self.centers.shape[0] == 0:
            return math.inf
        d = np.sqrt(np.sum((self.centers - x) ** 2, axis=1))
        return float(np.min(d)) - self.rho

    def _spatial_contains(self, t, x):
        return self.clearance(x) > 0.0

    def _spatial_distance(self, t, x):
        return self.clearance(x)

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        return FuncRegion(
            0.0, float(n), float(n), self.dim,
            lambda t, x: self.clearance(x), 1.0 / n,
        )


class _CollisionFree(SpaceTimeDomain):
    """Q = R+ x {x in R^{M*d}: all particle positions distinct}."""

    def __init__(self, n_particles, dim_per):
        if n_particles < 2:
            raise PreconditionError("need at least 2 particles")
        super().__init__(
            n_particles * dim_per,
            "collision-free",
            {"n_particles": n_particles, "dim_per": dim_per},
        )
        self.n_particles = int(n_particles)
        self.dim_per = int(dim_per)

    def separation(self, x):
        """min pairwise distance / sqrt(2) = distance to the collision set."""
        pts = np.asarray(x, dtype=np.float64).reshape(self.n_particles, self.dim_per)
        best = math.inf
        for k in range(self.n_particles):
            for j in range(k + 1, self.n_particles):
                best = min(best, float(np.linalg.norm(pts[k] - pts[j])))
        return best / math.sqrt(2.0)

    def _spatial_contains(self, t, x):
        return self.separation(x) > 0.0

    def _spatial_distance(self, t, x):
        return self.separation(x)

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        return FuncRegion(
            0.0, float(n), float(n), self.dim,
            lambda t, x: self.separation(x), 1.0 / n,
        )


class _PredicateDomain(SpaceTimeDomain):
    """Domain given only by a membership predicate; distances by ray probing.

    Probing marches 2d axis rays plus 16 fixed random rays (the two time
    faces are handled analytically), bisecting the first sign change. The
    result is a lower bound on the true distance up to ray coverage.
    """

    def __init__(self, dim, pred, probe_radius=8.0, time_hi=math.inf):
        super().__init__(dim, "predicate", {"dim": dim}, time_hi=time_hi)
        self.pred = pred
        self.probe_radius = float(probe_radius)
        self._dirs = _probe_directions(dim)

    def _spatial_contains(self, t, x):
        return bool(self.pred(t, x))

    def _spatial_distance(self, t, x):
        return _probe_distance(self.pred, t, x, self.probe_radius, self._dirs)

    def exhaustion_level(self, n):
        if n < 1:
            raise PreconditionError("exhaustion level must be >= 1")
        r_max = 1.5 / n

        def clear(t, x, _r=r_max):
            return _probe_distance(self.pred, t, x, _r, self._dirs)

        return FuncRegion(
            0.0, float(n), float(n), self.dim, clear, 1.0 / n,
            extra_pred=self.pred,
        )


# ---------------------------------------------------------------------------
# constructors and free-function forms of the operations


def full_space(dim):
    return _FullSpace(dim)


def half_space(dim=1, axis=0):
    return _HalfSpace(dim, axis)


def box_domain(lo, hi, time_hi=math.inf):
    return _BoxDomain(lo, hi, time_hi)


def punctured_plane():
    return _PuncturedPlane()


def punctured_space(dim, centers, rho):
    return _PuncturedSpace(dim, centers, rho)


def collision_free(n_particles, dim_per):
    return _CollisionFree(n_particles, dim_per)


def from_predicate(dim, pred, probe_radius=8.0, time_hi=math.inf):
    return _PredicateDomain(dim, pred, probe_radius, time_hi)


def contains(domain, p):
    return domain.contains(p)


def exhaustion_level(domain, n):
    return domain.exhaustion_level(n)


def which_level(domain, p, n_max):
    return domain.which_level(p, n_max)


def boundary_distance(domain, p):
    return domain.boundary_distance(p)
