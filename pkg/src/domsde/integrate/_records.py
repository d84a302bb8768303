"""Step policies, path records, step-size control, and run counting."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..domain import as_point
from ..errors import PreconditionError

__all__ = [
    "StepPolicy",
    "Survived",
    "PathRecord",
    "step_size",
    "run_counter",
]


@dataclass(frozen=True)
class StepPolicy:
    """Adaptive step-size policy for the Euler scheme.

    The step is
        dt = clamp(min(dt_max, c1 * D^2 / K_est, c2 / (1 + |b|^2)),
                   dt_min, dt_max)
    where D is the distance to the boundary faces a forward-in-time path can
    reach and |b| the (clipped) drift magnitude. Set c1 or c2 to inf to
    disable a term; set dt_min == dt_max with both terms disabled for a
    fixed-step scheme.

    ``b_max`` clips the drift magnitude (clips are counted); a path whose
    clip count exceeds ``clip_cap``, or whose step count exceeds
    ``max_steps``, is flagged unresolved rather than returned as valid.
    ``tol_xi`` is the bisection tolerance for the exit time.
    """

    dt_max: float = 1e-2
    dt_min: float = 1e-10
    c1: float = 0.1
    c2: float = 1.0
    tol_xi: float = 1e-12
    b_max: float = 1e6
    clip_cap: int = 10_000
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not 0.0 < self.dt_min <= self.dt_max:
            raise PreconditionError("need 0 < dt_min <= dt_max")
        if self.tol_xi <= 0.0:
            raise PreconditionError("tol_xi must be positive")

    @classmethod
    def fixed(cls, dt, **kw):
        """Fixed-step policy: dt_min = dt_max = dt, adaptive terms off."""
        kw.setdefault("c1", math.inf)
        kw.setdefault("c2", math.inf)
        return cls(dt_max=dt, dt_min=dt, **kw)

    def to_json_dict(self):
        return {
            "dt_max": self.dt_max,
            "dt_min": self.dt_min,
            "c1": self.c1,
            "c2": self.c2,
            "tol_xi": self.tol_xi,
            "b_max": self.b_max,
            "clip_cap": self.clip_cap,
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True)
class Survived:
    """Sentinel lifetime: the path outlived the horizon (xi > horizon).

    The simulation can never certify non-explosion, only survival past the
    horizon, so no numeric xi is reported for such paths.
    """

    horizon: float

    def __repr__(self):
        return "SURVIVED(%g)" % self.horizon


@dataclass
class PathRecord:
    """One simulated path up to exit or horizon.

    ``times`` (relative clock, times[0] == 0) and ``states`` hold only alive
    points: every recorded (s + times[k], states[k]) lies in Q. For killed
    paths the crossing point at xi is stored separately in ``exit_state``.
    ``dts`` are the step sizes actually taken, one per increment; for killed
    paths the final entry is the partial step xi - times[-1]. ``dws`` (when
    recorded) are the Brownian increments aligned with ``dts``, the final
    one scaled by the same exit fraction.
    """

    s: float
    x0: np.ndarray
    times: np.ndarray
    states: np.ndarray
    dts: np.ndarray
    dws: Optional[np.ndarray]
    xi: object  # float when killed, Survived(horizon) otherwise
    killed: bool
    exit_state: Optional[np.ndarray]
    drift_clips: int
    substeps: int
    min_boundary_distance: float
    unresolved: bool
    seed: int
    path_index: int

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def survived(self):
        return (not self.killed) and (not self.unresolved)

    @property
    def t_end(self):
        """Last alive time on the relative clock."""
        return float(self.times[-1])

    def lifetime_or(self, default):
        return float(self.xi) if self.killed else default


def _step_value(policy, exit_dist, bb, k_est):
    """The step-size formula shared by all engines (pre horizon clamp)."""
    dt = policy.dt_max
    if math.isfinite(policy.c1) and math.isfinite(exit_dist):
        dt = min(dt, policy.c1 * exit_dist * exit_dist / k_est)
    if math.isfinite(policy.c2):
        dt = min(dt, policy.c2 / (1.0 + bb))
    if dt < policy.dt_min:
        dt = policy.dt_min
    return dt


def step_size(policy, p, coeffs, domain):
    """The adaptive step the engine would take from p (before horizon clamp)."""
    p = as_point(p, coeffs.dim)
    if not domain.contains(p):
        raise PreconditionError("step_size: point not in Q: %r" % (p,))
    b = coeffs.drift_at(p.t, p.x)
    bb = 0.0
    for i in range(coeffs.dim):
        bb += float(b[i]) * float(b[i])
    if bb > policy.b_max * policy.b_max:
        bb = policy.b_max * policy.b_max
    ed = domain.exit_distance(p)
    return _step_value(policy, ed, bb, coeffs.k_est)


def run_counter(path, domain, n):
    """Count completed runs between exhaustion levels n and n+1.

    A run completes when the space-time path, having started (or re-entered
    the closure of Q^n), exits the open set Q^{n+1}. The alternating
    stopping scheme starts armed (nu_0 = 0), so a path that begins outside
    Q^{n+1} scores a run immediately. Death counts as the final exit when a
    run was in progress, since leaving Q leaves Q^{n+1}.
    """
    if n < 1:
        raise PreconditionError("run_counter requires n >= 1")
    qn = domain.exhaustion_level(n)
    qn1 = domain.exhaustion_level(n + 1)
    count = 0
    seeking_exit = True
    for k in range(path.times.shape[0]):
        t_abs = path.s + float(path.times[k])
        x = path.states[k]
        if seeking_exit:
            if not qn1.contains(t_abs, x):
                count += 1
                seeking_exit = False
        else:
            if qn.in_closure(t_abs, x):
                seeking_exit = True
    if path.killed and seeking_exit:
        count += 1
    return count
