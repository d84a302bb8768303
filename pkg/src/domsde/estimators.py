"""Monte Carlo estimators for the quantities the theory bounds.

Every estimator simulates independent path streams (one counter-based
stream per path index), turns each resolved path into one scalar, and
aggregates with order-independent reductions, so reports are identical
regardless of worker count. Unresolved paths (the integrator gave up) are
excluded from the estimate and counted separately; when they exceed 1% of
the sample the report is flagged invalid.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    PreconditionError,
    SingularDiffusionError,
)
from .integrate import StepPolicy, iter_paths, resolve_engine, run_counter
from .lyapunov import lp_lq_norm

__all__ = [
    "MonteCarloReport",
    "FieldSpec",
    "make_field",
    "explosion_probability",
    "sup_exp_moment",
    "krylov_ratio",
    "exp_functional",
    "run_moment",
    "girsanov_weight",
    "reweighted_mean",
    "REPORT_VERSION",
]

REPORT_VERSION = "1"

_HARD_UNRESOLVED_FRACTION = 0.01
_EXP_OVERFLOW = 709.0  # exp argument beyond which float64 overflows


@dataclass(frozen=True)
class MonteCarloReport:
    """One Monte Carlo estimate with its provenance and quality flags."""

    estimand: str
    estimate: float
    std_error: float
    n_paths: int
    effective_sample_size: float
    seed: int
    config_digest: str = ""
    engine: str = "python"
    n_unresolved: int = 0
    warnings: tuple = ()
    valid: bool = True
    extra: dict = field(default_factory=dict)
    version: str = REPORT_VERSION

    def __post_init__(self):
        if self.std_error < 0.0 and not math.isnan(self.std_error):
            raise PreconditionError("standard error must be nonnegative")
        if self.effective_sample_size > self.n_paths + 1e-9:
            raise PreconditionError(
                "effective sample size cannot exceed the path count"
            )

    def to_json_dict(self):
        return {
            "estimand": self.estimand,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "effective_sample_size": self.effective_sample_size,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "engine": self.engine,
            "n_unresolved": self.n_unresolved,
            "warnings": list(self.warnings),
            "valid": self.valid,
            "extra": dict(self.extra),
            "version": self.version,
        }


# ---------------------------------------------------------------------------
# truncated scalar fields (Krylov / exponential-functional integrands)


@dataclass(frozen=True)
class FieldSpec:
    """A scalar field truncated to a declared space-time box.

    Evaluations outside the box are exactly zero; the box is also the
    region over which the mixed-norm denominator is computed.
    """

    label: str
    fn: Callable[[float, np.ndarray], float]
    t_lo: float
    t_hi: float
    x_lo: tuple
    x_hi: tuple

    def __call__(self, t, x):
        if not (self.t_lo <= t < self.t_hi):
            return 0.0
        for i in range(len(self.x_lo)):
            xi = float(x[i])
            if not (self.x_lo[i] <= xi < self.x_hi[i]):
                return 0.0
        return float(self.fn(t, x))

    def scaled(self, c, label=None):
        """The field c*f with the same truncation box."""
        base = self.fn

        def fn(t, x, _b=base, _c=float(c)):
            return _c * float(_b(t, x))

        return FieldSpec(
            label=label or ("%g*%s" % (c, self.label)),
            fn=fn,
            t_lo=self.t_lo,
            t_hi=self.t_hi,
            x_lo=self.x_lo,
            x_hi=self.x_hi,
        )


def _field_box(spec, dim):
    t_lo = float(spec.get("t_lo", 0.0))
    t_hi = float(spec.get("t_hi", 1.0))
    x_lo = spec.get("x_lo", [-1.0] * dim)
    x_hi = spec.get("x_hi", [1.0] * dim)
    x_lo = tuple(float(v) for v in np.atleast_1d(x_lo))
    x_hi = tuple(float(v) for v in np.atleast_1d(x_hi))
    if len(x_lo) != dim or len(x_hi) != dim:
        raise ConfigError(
            "field box must match the model dimension %d" % dim
        )
    if not t_lo < t_hi or any(l >= h for l, h in zip(x_lo, x_hi)):
        raise ConfigError("field box must have positive extent on every axis")
    return t_lo, t_hi, x_lo, x_hi


def make_field(spec, dim):
    """Build a FieldSpec from a config-style description.

    Kinds: ``constant`` (value), ``indicator`` (1 inside the box), ``abs``
    (scale*|x|), ``coordinate`` (scale*x_index). All are truncated to the
    declared box (t_lo, t_hi, x_lo, x_hi).
    """
    if isinstance(spec, FieldSpec):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("field spec must be a dict with a 'kind' key")
    kind = spec["kind"]
    known = {
        "constant": {"kind", "value", "t_lo", "t_hi", "x_lo", "x_hi"},
        "indicator": {"kind", "t_lo", "t_hi", "x_lo", "x_hi"},
        "abs": {"kind", "scale", "t_lo", "t_hi", "x_lo", "x_hi"},
        "coordinate": {"kind", "scale", "index", "t_lo", "t_hi", "x_lo", "x_hi"},
    }
    if kind not in known:
        raise ConfigError(
            "unknown field kind %r (use constant | indicator | abs | "
            "coordinate)" % (kind,)
        )
    extra = set(spec) - known[kind]
    if extra:
        raise ConfigError("unknown field key %r" % (sorted(extra)[0],))
    t_lo, t_hi, x_lo, x_hi = _field_box(spec, dim)
    if kind == "constant":
        value = float(spec.get("value", 1.0))

        def fn(t, x):
            return value

        label = "constant(%g)" % value
    elif kind == "indicator":

        def fn(t, x):
            return 1.0

        label = "indicator"
    elif kind == "abs":
        scale = float(spec.get("scale", 1.0))

        def fn(t, x):
            return scale * float(np.linalg.norm(np.asarray(x, dtype=np.float64)))

        label = "abs(%g)" % scale
    else:
        scale = float(spec.get("scale", 1.0))
        index = int(spec.get("index", 0))
        if not 0 <= index < dim:
            raise ConfigError(
                "coordinate index %d out of range for dimension %d "
                "(0-based)" % (index, dim)
            )

        def fn(t, x):
            return scale * float(x[index])

        label = "coordinate[%d]" % index
    return FieldSpec(label=label, fn=fn, t_lo=t_lo, t_hi=t_hi,
                     x_lo=x_lo, x_hi=x_hi)


# ---------------------------------------------------------------------------
# shared path-collection machinery


def _resolve_start(model, start):
    if start is None:
        start = model.default_start
    if start is None:
        raise PreconditionError(
            "model %r has no default start; pass one explicitly" % model.name
        )
    return start


def _collect(model, start, horizon, policy, seed, n_paths, workers, engine,
             path_fn, record_dw=False, family=0):
    """Run paths, map each resolved one through path_fn, index the results.

    Returns (values array over resolved paths in index order, n_unresolved,
    clip info dict, resolved engine name).
    """
    n_paths = int(n_paths)
    if n_paths < 1:
        raise PreconditionError("n_paths must be at least 1")
    if policy is None:
        policy = StepPolicy()
    lane = resolve_engine(engine, model.kernel)
    vals = np.empty(n_paths)
    ok = np.zeros(n_paths, dtype=bool)
    clip_paths = 0
    clip_total = 0
    for idx, rec in iter_paths(
        model.coefficients, model.domain, start, horizon, policy, seed,
        n_paths, workers=workers, engine=engine, kernel=model.kernel,
        record_dw=record_dw, family=family,
    ):
        if rec.drift_clips:
            clip_paths += 1
            clip_total += rec.drift_clips
        if rec.unresolved:
            continue
        vals[idx] = path_fn(rec)
        ok[idx] = True
    clips = {"clipped_paths": clip_paths, "clip_total": clip_total}
    return vals[ok], int(n_paths - int(ok.sum())), clips, lane


def _base_warnings(n_paths, n_unresolved, clips):
    warns = []
    valid = True
    if clips["clipped_paths"]:
        warns.append(
            "drift clipped on %d path(s) (%d clips total)"
            % (clips["clipped_paths"], clips["clip_total"])
        )
    if n_unresolved:
        frac = n_unresolved / n_paths
        if frac > _HARD_UNRESOLVED_FRACTION:
            warns.append(
                "%.1f%% of paths unresolved (limit 1%%); estimate unreliable"
                % (100.0 * frac)
            )
            valid = False
        else:
            warns.append("%d unresolved path(s) excluded" % n_unresolved)
    return warns, valid


def _mean_report(estimand, used, n_paths, n_unresolved, clips, seed,
                 config_digest, lane, extra=None, ess=None):
    """Assemble the standard unweighted-mean report."""
    warns, valid = _base_warnings(n_paths, n_unresolved, clips)
    n_used = used.shape[0]
    if n_used == 0:
        warns.append("no resolved paths; estimate undefined")
        return MonteCarloReport(
            estimand=estimand, estimate=math.nan, std_error=math.nan,
            n_paths=n_paths, effective_sample_size=0.0, seed=seed,
            config_digest=config_digest, engine=lane,
            n_unresolved=n_unresolved, warnings=tuple(warns), valid=False,
            extra=dict(extra or {}),
        )
    if np.all(np.isfinite(used)):
        est = float(np.mean(used))
        se = (float(np.std(used, ddof=1) / math.sqrt(n_used))
              if n_used > 1 else 0.0)
    else:
        est = float(np.mean(used))
        se = math.inf
        warns.append("non-finite path contributions present")
    return MonteCarloReport(
        estimand=estimand, estimate=est, std_error=se, n_paths=n_paths,
        effective_sample_size=float(n_used if ess is None else ess),
        seed=seed, config_digest=config_digest, engine=lane,
        n_unresolved=n_unresolved, warnings=tuple(warns), valid=valid,
        extra=dict(extra or {}),
    )


# ---------------------------------------------------------------------------
# estimators


def explosion_probability(model, start, T, n_paths, policy=None, seed=0,
                          workers=1, engine="auto", config_digest=""):
    """P(xi <= T): the fraction of paths hitting the boundary before T.

    Killed-before-T is a Bernoulli variable per path, so the standard error
    is the binomial one. Lifetime summary statistics of the killed paths
    ride along in extra.
    """
    start = _resolve_start(model, start)
    T = float(T)
    lifetimes = []

    def one(rec):
        if rec.killed:
            lifetimes.append(float(rec.xi))
            return 1.0
        return 0.0

    used, n_unres, clips, lane = _collect(
        model, start, T, policy, seed, n_paths, workers, engine, one,
    )
    extra = {"horizon": T}
    if lifetimes:
        lt = np.sort(np.asarray(lifetimes))
        extra["lifetimes"] = {
            "n_killed": int(lt.shape[0]),
            "mean": float(np.mean(lt)),
            "min": float(lt[0]),
            "median": float(lt[lt.shape[0] // 2]),
            "max": float(lt[-1]),
        }
    rep = _mean_report(
        "explosion_probability", used, int(n_paths), n_unres, clips, seed,
        config_digest, lane, extra=extra,
    )
    if rep.estimate == rep.estimate and used.shape[0] > 1:  # not NaN
        # binomial standard error for the Bernoulli mean
        phat = rep.estimate
        se = math.sqrt(max(phat * (1.0 - phat), 0.0) / used.shape[0])
        rep = MonteCarloReport(
            estimand=rep.estimand, estimate=phat, std_error=se,
            n_paths=rep.n_paths,
            effective_sample_size=rep.effective_sample_size,
            seed=rep.seed, config_digest=rep.config_digest,
            engine=rep.engine, n_unresolved=rep.n_unresolved,
            warnings=rep.warnings, valid=rep.valid, extra=rep.extra,
        )
    return rep


def sup_exp_moment(model, constants, start, T, n_paths, policy=None, seed=0,
                   workers=1, engine="auto", config_digest=""):
    """Mean over paths of sup_t exp(mu phi(s+t, X_t) + mu nu |X_t|^2).

    The supremum runs over the recorded grid (killed paths contribute the
    supremum over their lifetime), so it understates the continuous-time
    supremum; extra records the coarsest step used so refinement studies
    are interpretable.
    """
    pot = model.lyapunov_potential
    if pot is None:
        raise PreconditionError(
            "sup_exp_moment needs a gradient-type model with a potential"
        )
    start = _resolve_start(model, start)
    mu = float(constants.mu)
    nu = float(constants.nu)
    max_dt = [0.0]

    def one(rec):
        if rec.dts.shape[0]:
            md = float(np.max(rec.dts))
            if md > max_dt[0]:
                max_dt[0] = md
        best = -math.inf
        for k in range(rec.times.shape[0]):
            x = rec.states[k]
            xx = float(np.dot(x, x))
            e = mu * pot.value(rec.s + float(rec.times[k]), x) + mu * nu * xx
            if e > best:
                best = e
        if best > _EXP_OVERFLOW:
            return math.inf
        return math.exp(best)

    used, n_unres, clips, lane = _collect(
        model, start, float(T), policy, seed, n_paths, workers, engine, one,
    )
    extra = {
        "mu": mu,
        "nu": nu,
        "horizon": float(T),
        "max_dt": max_dt[0],
    }
    return _mean_report(
        "sup_exp_moment", used, int(n_paths), n_unres, clips, seed,
        config_digest, lane, extra=extra,
    )


def _path_quadrature(rec, f, S=0.0):
    """Left-endpoint quadrature of f along the path from S to T and xi."""
    acc = 0.0
    n_incr = rec.dts.shape[0]
    for k in range(n_incr):
        tk = float(rec.times[k])
        if tk < S:
            continue
        acc += abs(float(f(rec.s + tk, rec.states[k]))) * float(rec.dts[k])
    return acc


def krylov_ratio(model, f_family, S, T, p, q, n_paths, seed=0, policy=None,
                 start=None, workers=1, engine="auto", config_digest="",
                 norm_grid=128):
    """Occupation-integral-to-norm ratios for a family of truncated fields.

    For each field f: E integral_S^{T and xi} |f(t, X_t)| dt estimated by
    left-endpoint quadrature along paths, divided by the mixed (p, q) norm
    of f over its declared box. Returns a dict with one report per family
    member plus the maximal ratio; zero-norm members are skipped with a
    warning.
    """
    start = _resolve_start(model, start)
    S = float(S)
    T = float(T)
    if not S < T:
        raise PreconditionError("krylov_ratio requires S < T")
    fields = [make_field(f, model.dim) for f in f_family]
    if not fields:
        raise PreconditionError("f_family must not be empty")

    quads = []

    def one(rec):
        quads.append((rec.path_index, [
            _path_quadrature(rec, f, S=S) for f in fields
        ]))
        return 0.0

    _, n_unres, clips, lane = _collect(
        model, start, T, policy, seed, n_paths, workers, engine, one,
    )
    quads.sort(key=lambda kv: kv[0])
    table = np.asarray([row for _, row in quads], dtype=np.float64)
    members = []
    max_ratio = -math.inf
    max_label = None
    for j, f in enumerate(fields):
        norm = lp_lq_norm(
            f, S, T, f.x_lo, f.x_hi, float(p), float(q),
            grid_resolution=norm_grid,
        )
        if norm == 0.0:
            warns, valid = _base_warnings(int(n_paths), n_unres, clips)
            warns.append("field %s has zero norm; skipped" % f.label)
            members.append(MonteCarloReport(
                estimand="krylov_ratio:%s" % f.label,
                estimate=math.nan, std_error=math.nan,
                n_paths=int(n_paths), effective_sample_size=0.0, seed=seed,
                config_digest=config_digest, engine=lane,
                n_unresolved=n_unres, warnings=tuple(warns), valid=False,
                extra={"norm": 0.0, "p": float(p), "q": float(q)},
            ))
            continue
        col = table[:, j] if table.size else np.zeros(0)
        rep = _mean_report(
            "krylov_ratio:%s" % f.label, col / norm, int(n_paths), n_unres,
            clips, seed, config_digest, lane,
            extra={
                "numerator": float(np.mean(col)) if col.size else math.nan,
                "norm": float(norm),
                "p": float(p),
                "q": float(q),
                "S": S,
                "T": T,
            },
        )
        members.append(rep)
        if rep.valid and rep.estimate > max_ratio:
            max_ratio = rep.estimate
            max_label = f.label
    return {
        "members": members,
        "max_ratio": (max_ratio if max_label is not None else math.nan),
        "max_label": max_label,
    }


def exp_functional(model, g, kappa, T, n_paths, seed=0, policy=None,
                   start=None, workers=1, engine="auto", config_digest=""):
    """Mean of exp(kappa * integral_0^{T and xi} |g(t, X_t)|^2 dt).

    Left-endpoint quadrature along each path; kappa = 0 short-circuits to
    exactly 1. A tail-heaviness warning fires when the top 1% of weights
    carries more than half the total mass.
    """
    start = _resolve_start(model, start)
    kappa = float(kappa)
    gf = make_field(g, model.dim) if not callable(g) else g

    def one(rec):
        if kappa == 0.0:
            return 1.0
        acc = 0.0
        for k in range(rec.dts.shape[0]):
            v = float(gf(rec.s + float(rec.times[k]), rec.states[k]))
            acc += v * v * float(rec.dts[k])
        e = kappa * acc
        if e > _EXP_OVERFLOW:
            return math.inf
        return math.exp(e)

    used, n_unres, clips, lane = _collect(
        model, start, float(T), policy, seed, n_paths, workers, engine, one,
    )
    extra = {"kappa": kappa, "horizon": float(T)}
    rep = _mean_report(
        "exp_functional", used, int(n_paths), n_unres, clips, seed,
        config_digest, lane, extra=extra,
    )
    if used.shape[0] > 1 and np.all(np.isfinite(used)):
        total = float(np.sum(used))
        if total > 0.0:
            top = np.sort(used)[::-1]
            k = max(1, int(math.ceil(0.01 * used.shape[0])))
            if float(np.sum(top[:k])) > 0.5 * total:
                rep = MonteCarloReport(
                    estimand=rep.estimand, estimate=rep.estimate,
                    std_error=rep.std_error, n_paths=rep.n_paths,
                    effective_sample_size=rep.effective_sample_size,
                    seed=rep.seed, config_digest=rep.config_digest,
                    engine=rep.engine, n_unresolved=rep.n_unresolved,
                    warnings=rep.warnings + (
                        "heavy tail: top 1% of weights carries >50% of "
                        "the mass",
                    ),
                    valid=rep.valid, extra=rep.extra,
                )
    return rep


def run_moment(model, start, S, n_level, alpha, n_paths, seed=0, policy=None,
               workers=1, engine="auto", config_digest=""):
    """Mean of the run counter between Q^n and Q^{n+1} raised to alpha.

    Runs are counted on paths truncated at S and xi; alpha must lie in
    [0, 1/2) per the moment bound being probed, and 0^0 := 0 so the
    alpha = 0 estimand is P(nu >= 1).
    """
    alpha = float(alpha)
    if not 0.0 <= alpha < 0.5:
        raise PreconditionError("alpha must lie in [0, 1/2)")
    n_level = int(n_level)
    start = _resolve_start(model, start)
    domain = model.domain

    def one(rec):
        nu = run_counter(rec, domain, n_level)
        if nu == 0:
            return 0.0
        return float(nu) ** alpha

    used, n_unres, clips, lane = _collect(
        model, start, float(S), policy, seed, n_paths, workers, engine, one,
    )
    extra = {"S": float(S), "n_level": n_level, "alpha": alpha}
    return _mean_report(
        "run_moment", used, int(n_paths), n_unres, clips, seed,
        config_digest, lane, extra=extra,
    )


def girsanov_weight(path, b1, b2, diff):
    """Discrete change-of-measure weight for drift b2 against drift b1.

    exp( sum_k db*(sigma*)^{-1}|_k dW_k - (1/2) sum_k db*(sigma sigma*)^{-1}
    db|_k dt_k ) with db = b2 - b1 at the left endpoint of each step; the
    path must have been generated under b1 with its Gaussian increments
    recorded.
    """
    if path.dws is None:
        raise PreconditionError(
            "girsanov_weight needs a path recorded with record_dw=True"
        )
    n_incr = path.dts.shape[0]
    acc = 0.0
    for k in range(n_incr):
        t = path.s + float(path.times[k])
        x = path.states[k]
        db = (np.asarray(b2(t, x), dtype=np.float64).reshape(-1)
              - np.asarray(b1(t, x), dtype=np.float64).reshape(-1))
        if not db.any():
            continue
        sig = diff(t, x)
        try:
            w = np.linalg.solve(sig, db)
        except np.linalg.LinAlgError:
            raise SingularDiffusionError(
                "diffusion matrix singular at t=%g along the path" % t
            )
        if not np.all(np.isfinite(w)):
            raise SingularDiffusionError(
                "diffusion solve produced non-finite values at t=%g" % t
            )
        acc += float(np.dot(w, path.dws[k]))
        acc -= 0.5 * float(np.dot(w, w)) * float(path.dts[k])
    if acc > _EXP_OVERFLOW:
        return math.inf
    return math.exp(acc)


def reweighted_mean(values, weights):
    """Unnormalized importance-sampling mean: (estimate, std error, ESS).

    estimate = mean(w v); the effective sample size (sum w)^2 / sum w^2
    quantifies weight degeneracy.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape or values.ndim != 1 or not values.size:
        raise PreconditionError(
            "values and weights must be equal-length 1-D arrays"
        )
    prod = values * weights
    n = values.shape[0]
    est = float(np.mean(prod))
    se = float(np.std(prod, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    sw = float(np.sum(weights))
    sw2 = float(np.sum(weights * weights))
    ess = (sw * sw / sw2) if sw2 > 0.0 else 0.0
    return est, se, min(ess, float(n))
