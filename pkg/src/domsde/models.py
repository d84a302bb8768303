"""Builtin model catalog: worked examples, applications, and validation toys.

Every model bundles a domain, a coefficient set, optional Lyapunov data and
an optional compiled-kernel dispatch record into an immutable ModelSpec.
The drift/diffusion closures of kernel-backed models are written as scalar
``math.*`` expressions that mirror the compiled kernels term by term, so
the pure-Python engine and the compiled lane produce bit-identical paths.

Models are constructed either through the ``make_*`` functions or by name
through ``build_model`` (the config entry point).
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coeffs import (
    CoefficientSet,
    DiffusionField,
    PotentialField,
    divergence_correction,
)
from .domain import (
    SpaceTimeDomain,
    collision_free,
    full_space,
    half_space,
    punctured_plane,
    punctured_space,
)
from .errors import ConfigError, PreconditionError
from .integrate import (
    KERNEL_BESSEL,
    KERNEL_INV_QUAD,
    KERNEL_LINEAR_DIAG,
    KERNEL_LOG_PLANE,
    KERNEL_SINGULAR_POTENTIAL,
    KernelSpec,
)

__all__ = [
    "ModelSpec",
    "make_example_611",
    "make_example_612",
    "make_example_62",
    "make_random_media",
    "make_particle_system",
    "make_validation_toys",
    "admissibility_check",
    "build_model",
    "MODEL_NAMES",
]

_KERNEL_MAX_DIM = 16


@dataclass(frozen=True)
class ModelSpec:
    """One ready-to-simulate model.

    ``potential`` is the defining potential phi of the construction (the
    pair-interaction sum for the applications); the Lyapunov-certified
    potential lives on ``coefficients.potential`` and may differ from it by
    the confining term whose gradient is ``coefficients.extra_drift``. For
    the plain gradient-type examples the two coincide.
    """

    name: str
    dim: int
    domain: SpaceTimeDomain
    coefficients: CoefficientSet
    potential: Optional[PotentialField] = None
    params: dict = field(default_factory=dict)
    analytic_gradient: bool = False
    analytic_jacobian: bool = False
    oracle: Optional[dict] = None
    kernel: Optional[KernelSpec] = None
    default_start: Optional[tuple] = None
    notes: tuple = ()

    @property
    def oracle_available(self):
        return self.oracle is not None

    @property
    def lyapunov_potential(self):
        """The potential carrying the (epsilon, K1, h) certification data."""
        return self.coefficients.potential

    def describe(self):
        """Short human-readable summary used by the CLI."""
        bits = [
            "%s: d=%d on %s" % (self.name, self.dim, self.domain.name),
            "provenance=%s" % self.coefficients.provenance,
            "kernel=%s" % ("yes" if self.kernel is not None else "no"),
        ]
        if self.notes:
            bits.append("notes: " + "; ".join(self.notes))
        return "; ".join(bits)


# ---------------------------------------------------------------------------
# builtin diffusion family


def _constant_sigma(dim, value):
    c = float(value)
    if c <= 0.0:
        raise ConfigError("constant sigma requires a positive value")
    eye = np.eye(dim)
    zeros = np.zeros((dim, dim, dim))

    def sigma(t, x):
        return c * eye

    def jac(t, x):
        return zeros

    diff = DiffusionField(dim=dim, sigma=sigma, jacobian=jac, label="constant")
    return diff, c * c, {"family": "constant", "value": c}


def _sine_sigma(dim):
    """sigma = diag(2 + sin x_i): C^2_b, eigenvalues in [1, 3]."""

    def sigma(t, x):
        out = np.zeros((dim, dim))
        for i in range(dim):
            out[i, i] = 2.0 + math.sin(float(x[i]))
        return out

    def jac(t, x):
        out = np.zeros((dim, dim, dim))
        for i in range(dim):
            out[i, i, i] = math.cos(float(x[i]))
        return out

    diff = DiffusionField(dim=dim, sigma=sigma, jacobian=jac, label="sine")
    return diff, 9.0, {"family": "sine"}


def _make_sigma(spec, dim, *, require_elliptic=False):
    """Resolve a diffusion family spec to (field, k_est, meta)."""
    if spec is None:
        spec = {"family": "constant", "value": 1.0}
    if isinstance(spec, str):
        spec = {"family": spec}
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(
            "sigma spec must be a family name or a dict with a 'family' key"
        )
    family = spec["family"]
    extra = set(spec) - {"family", "value"}
    if extra:
        raise ConfigError("unknown sigma spec key %r" % (sorted(extra)[0],))
    if family == "constant":
        return _constant_sigma(dim, spec.get("value", 1.0))
    if family == "sine":
        if "value" in spec:
            raise ConfigError("sigma family 'sine' takes no 'value'")
        return _sine_sigma(dim)
    if family == "inverse-quadratic":
        if require_elliptic:
            raise ConfigError(
                "sigma family 'inverse-quadratic' is not uniformly elliptic "
                "on unbounded sets; use 'constant' or 'sine'"
            )
        raise ConfigError(
            "sigma family 'inverse-quadratic' is built in only through the "
            "half-line example model"
        )
    raise ConfigError(
        "unknown sigma family %r (use constant | sine)" % (family,)
    )


# ---------------------------------------------------------------------------
# builtin pair-potential family


@dataclass(frozen=True)
class _PairPotential:
    """A pair interaction V with declared gradient (+ U-domination data)."""

    label: str
    V: object
    gradV: object
    meta: dict
    # (C_U, alpha) such that |V| + |grad V| <= C_U (1+|y|^2)^{-alpha}
    # wherever the model evaluates V; None when no such bound is declared.
    domination: Optional[tuple] = None


def _power_law_potential(params, d, *, for_media, rho):
    alpha = float(params.get("alpha", 2.0))
    c = float(params.get("C", 1.0))
    if alpha <= 0.0 or c <= 0.0:
        raise ConfigError("power-law potential requires alpha > 0 and C > 0")
    if for_media and alpha <= d / 2.0:
        raise ConfigError(
            "power-law potential for random media requires alpha > d/2 "
            "(got alpha=%g, d=%d)" % (alpha, d)
        )

    def V(y):
        return c * (1.0 + float(np.dot(y, y))) ** (-alpha)

    def gradV(y):
        y = np.asarray(y, dtype=np.float64)
        return (-2.0 * alpha * c) * (1.0 + float(np.dot(y, y))) ** (-alpha - 1.0) * y

    # |V| + |grad V| <= c (1 + 2 alpha |y| / (1+|y|^2)) (1+|y|^2)^{-alpha}
    #               <= c (1 + alpha) (1+|y|^2)^{-alpha}
    dom = (c * (1.0 + alpha), alpha)
    return _PairPotential(
        "power-law", V, gradV, {"family": "power-law", "alpha": alpha, "C": c}, dom
    )


def _hard_core_potential(params, d, *, for_media, rho):
    beta = float(params.get("beta", d + 1.0))
    tether = float(params.get("tether", 0.0))
    if beta <= 0.0 or tether < 0.0:
        raise ConfigError("hard-core potential requires beta > 0 and tether >= 0")
    if for_media:
        if tether != 0.0:
            raise ConfigError(
                "hard-core potential with a tether grows at infinity and "
                "cannot be U-dominated; use tether = 0 for random media"
            )
        if rho <= 0.0:
            raise ConfigError(
                "hard-core potential for random media requires rho > 0 "
                "(V blows up at the core and must stay below U outside it)"
            )
        if beta <= d:
            raise ConfigError(
                "hard-core potential for random media requires beta > d so "
                "that alpha = beta/2 > d/2"
            )

    def V(y):
        r = float(np.linalg.norm(y))
        return r ** (-beta) + tether * r

    def gradV(y):
        y = np.asarray(y, dtype=np.float64)
        r = float(np.linalg.norm(y))
        coef = -beta * r ** (-beta - 2.0)
        if tether:
            coef += tether / r
        return coef * y

    dom = None
    if for_media:
        # on |y| > rho: r^{-beta} <= (1 + 1/rho^2)^{beta/2} (1+r^2)^{-beta/2}
        # and |grad V| = beta r^{-beta-1} <= (beta/rho) r^{-beta}
        c_u = (1.0 + beta / rho) * (1.0 + 1.0 / rho**2) ** (beta / 2.0)
        dom = (c_u, beta / 2.0)
    return _PairPotential(
        "hard-core",
        V,
        gradV,
        {"family": "hard-core", "beta": beta, "tether": tether},
        dom,
    )


def _quadratic_potential(params, d):
    c = float(params.get("C", 1.0))
    if c <= 0.0:
        raise ConfigError("quadratic potential requires C > 0")

    def V(y):
        return c * float(np.dot(y, y))

    def gradV(y):
        return (2.0 * c) * np.asarray(y, dtype=np.float64)

    return _PairPotential(
        "quadratic", V, gradV, {"family": "quadratic", "C": c}, None
    )


def _make_pair_potential(spec, d, *, for_media, rho=0.0):
    """Resolve a pair-potential spec to a _PairPotential."""
    if spec is None:
        spec = {"family": "power-law"} if for_media else {"family": "quadratic"}
    if isinstance(spec, str):
        spec = {"family": spec}
    if not isinstance(spec, dict):
        raise ConfigError("potential spec must be a family name or a dict")
    if "V" in spec or "grad" in spec:
        if for_media:
            raise ConfigError(
                "random media accepts only the builtin U-dominated potential "
                "families (power-law, hard-core)"
            )
        if "V" not in spec or "grad" not in spec:
            raise ConfigError(
                "a user potential needs both 'V' and 'grad' callables"
            )
        extra = set(spec) - {"V", "grad", "label"}
        if extra:
            raise ConfigError("unknown potential spec key %r" % (sorted(extra)[0],))
        return _PairPotential(
            str(spec.get("label", "user")),
            spec["V"],
            spec["grad"],
            {"family": "user", "label": str(spec.get("label", "user"))},
            None,
        )
    family = spec.get("family")
    known = {
        "power-law": {"family", "alpha", "C"},
        "hard-core": {"family", "beta", "tether"},
        "quadratic": {"family", "C"},
    }
    if family not in known:
        raise ConfigError(
            "unknown potential family %r (use power-law | hard-core | "
            "quadratic | a {'V', 'grad'} pair)" % (family,)
        )
    extra = set(spec) - known[family]
    if extra:
        raise ConfigError("unknown potential spec key %r" % (sorted(extra)[0],))
    if family == "power-law":
        return _power_law_potential(spec, d, for_media=for_media, rho=rho)
    if family == "hard-core":
        return _hard_core_potential(spec, d, for_media=for_media, rho=rho)
    if for_media:
        raise ConfigError(
            "quadratic potentials grow at infinity and cannot serve as a "
            "random-media pair potential"
        )
    return _quadratic_potential(spec, d)


# ---------------------------------------------------------------------------
# worked examples


def make_example_611():
    """Half-line model with drift -1/x and diffusion (1+x^2)^{-1}.

    d=1 on Q = R+ x (0, infinity) with Q^n = (0,n) x (1/n, n); the drift is
    singular at the left endpoint and the diffusion degenerates at
    infinity, so paths live until they reach either end of the interval.
    """
    domain = half_space(1)

    def drift(t, x):
        x0 = float(x[0])
        return np.array([-1.0 / x0])

    def sigma(t, x):
        x0 = float(x[0])
        return np.array([[1.0 / (1.0 + x0 * x0)]])

    def jac(t, x):
        x0 = float(x[0])
        u = 1.0 + x0 * x0
        return np.array([[[-2.0 * x0 / (u * u)]]])

    coeffs = CoefficientSet(
        dim=1,
        drift=drift,
        diffusion=DiffusionField(dim=1, sigma=sigma, jacobian=jac,
                                 label="inverse-quadratic"),
        provenance="direct",
        k_est=1.0,
    )
    return ModelSpec(
        name="example-6-1-1",
        dim=1,
        domain=domain,
        coefficients=coeffs,
        params={},
        analytic_gradient=False,
        analytic_jacobian=True,
        oracle={"kind": "ellipticity", "level": 2, "bounds": (0.04, 0.64)},
        kernel=KernelSpec(KERNEL_INV_QUAD, (), 1),
        default_start=(0.0, (1.0,)),
    )


def make_example_612():
    """Punctured-plane model with drift x*ln|x1| and diffusion ln(2+|x|^2) I.

    d=2 on Q = R+ x (R^2 minus {x1 = 0}); the drift switches sign across
    |x1| = 1 and the isotropic diffusion grows logarithmically.
    """
    domain = punctured_plane()

    def drift(t, x):
        x0 = float(x[0])
        x1 = float(x[1])
        l = math.log(abs(x0))
        return np.array([x0 * l, x1 * l])

    def sigma(t, x):
        x0 = float(x[0])
        x1 = float(x[1])
        v = math.log(2.0 + (x0 * x0 + x1 * x1))
        return np.array([[v, 0.0], [0.0, v]])

    def jac(t, x):
        x0 = float(x[0])
        x1 = float(x[1])
        w = 2.0 / (2.0 + (x0 * x0 + x1 * x1))
        out = np.zeros((2, 2, 2))
        out[0, 0, 0] = x0 * w
        out[0, 1, 1] = x0 * w
        out[1, 0, 0] = x1 * w
        out[1, 1, 1] = x1 * w
        return out

    coeffs = CoefficientSet(
        dim=2,
        drift=drift,
        diffusion=DiffusionField(dim=2, sigma=sigma, jacobian=jac,
                                 label="log-isotropic"),
        provenance="direct",
        k_est=4.0,
    )
    return ModelSpec(
        name="example-6-1-2",
        dim=2,
        domain=domain,
        coefficients=coeffs,
        params={},
        analytic_gradient=False,
        analytic_jacobian=True,
        kernel=KernelSpec(KERNEL_LOG_PLANE, (), 2),
        default_start=(0.0, (1.0, 0.0)),
    )


def make_example_62(delta):
    """Half-line gradient-type model with potential |x|^{-delta} + |x|.

    The diffusion is 2 + sin x and the drift is assembled from the
    potential (gradient part plus divergence correction); the potential
    blows up at both ends of (0, infinity), and the elliptic Lyapunov
    condition holds with epsilon = 3/2 and a constant right-hand side.
    """
    delta = float(delta)
    if delta <= 0.0:
        raise PreconditionError("delta must be positive")
    domain = half_space(1)

    def phi(t, x):
        x0 = float(x[0])
        return math.pow(abs(x0), -delta) + abs(x0)

    def grad_phi(t, x):
        x0 = float(x[0])
        return np.array([-delta * x0 * math.pow(abs(x0), -delta - 2.0)
                         + x0 / abs(x0)])

    def dt_phi(t, x):
        return 0.0

    pot = PotentialField(
        dim=1,
        phi=phi,
        grad_phi=grad_phi,
        dt_phi=dt_phi,
        h=None,
        epsilon=1.5,
        K1=0.0,
        label="singular-potential",
    )

    def drift(t, x):
        x0 = float(x[0])
        q = 2.0 + math.sin(x0)
        return np.array([
            (delta * x0 * math.pow(abs(x0), -delta - 2.0) - x0 / abs(x0))
            * (q * q) + q * math.cos(x0)
        ])

    def sigma(t, x):
        x0 = float(x[0])
        return np.array([[2.0 + math.sin(x0)]])

    def jac(t, x):
        x0 = float(x[0])
        return np.array([[[math.cos(x0)]]])

    coeffs = CoefficientSet(
        dim=1,
        drift=drift,
        diffusion=DiffusionField(dim=1, sigma=sigma, jacobian=jac, label="sine"),
        provenance="gradient-type",
        potential=pot,
        k_est=9.0,
    )
    return ModelSpec(
        name="example-6-2",
        dim=1,
        domain=domain,
        coefficients=coeffs,
        potential=pot,
        params={"delta": delta},
        analytic_gradient=True,
        analytic_jacobian=True,
        kernel=KernelSpec(KERNEL_SINGULAR_POTENTIAL, (delta,), 1),
        default_start=(0.0, (1.0,)),
    )


# ---------------------------------------------------------------------------
# random media


def admissibility_check(gamma, c, r_list, n_probes=256):
    """Test the counting bound |gamma ∩ B_r(x)| <= c log(1+|x|) over probes.

    The probe set is deterministic: the origin, every impurity, and a fixed
    pseudo-random cloud over the configuration's bounding box expanded by
    the largest tested radius. Returns a dict with an overall verdict and a
    per-radius record of the worst probe.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.size == 0:
        gamma = gamma.reshape(0, max(gamma.shape[-1] if gamma.ndim > 1 else 1, 1))
    if gamma.ndim != 2:
        raise PreconditionError("gamma must be an (m, d) array of impurities")
    d = gamma.shape[1]
    r_list = [float(r) for r in r_list]
    if not r_list or any(r <= 0.0 for r in r_list):
        raise PreconditionError("r_list must contain positive radii")
    r_max = max(r_list)
    if gamma.shape[0]:
        lo = gamma.min(axis=0) - r_max
        hi = gamma.max(axis=0) + r_max
    else:
        lo = -np.ones(d)
        hi = np.ones(d)
    rng = np.random.Generator(
        np.random.Philox(key=np.array([0xAD315, 0], dtype=np.uint64))
    )
    probes = [np.zeros(d)]
    probes.extend(gamma)
    probes.extend(rng.uniform(lo, hi, size=(int(n_probes), d)))
    per_r = []
    admissible = True
    for r in r_list:
        worst = None
        passes = True
        for x in probes:
            if gamma.shape[0]:
                count = int(np.sum(np.linalg.norm(gamma - x, axis=1) < r))
            else:
                count = 0
            bound = float(c) * math.log1p(float(np.linalg.norm(x)))
            excess = count - bound
            if worst is None or excess > worst["excess"]:
                worst = {
                    "x": [float(v) for v in x],
                    "count": count,
                    "bound": bound,
                    "excess": excess,
                }
            if count > bound:
                passes = False
        admissible = admissible and passes
        per_r.append({"r": r, "passes": passes, "worst": worst})
    return {"admissible": admissible, "c": float(c), "per_r": per_r}


def _required_admissibility_constant(gamma, r_list, n_probes=256):
    """Smallest c making the counting bound hold on the probe set (may be inf)."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.size == 0:
        return 0.0
    if gamma.ndim == 1:
        gamma = gamma.reshape(1, -1)
    d = gamma.shape[1]
    r_max = max(float(r) for r in r_list)
    lo = gamma.min(axis=0) - r_max
    hi = gamma.max(axis=0) + r_max
    rng = np.random.Generator(
        np.random.Philox(key=np.array([0xAD315, 0], dtype=np.uint64))
    )
    probes = [np.zeros(d)]
    probes.extend(gamma)
    probes.extend(rng.uniform(lo, hi, size=(int(n_probes), d)))
    needed = 0.0
    for r in r_list:
        for x in probes:
            count = int(np.sum(np.linalg.norm(gamma - x, axis=1) < float(r)))
            if count == 0:
                continue
            logv = math.log1p(float(np.linalg.norm(x)))
            if logv == 0.0:
                return math.inf
            needed = max(needed, count / logv)
    return needed


def _tail_gradient_bound(cutoff_radius, window_radius, c_est, c_u, alpha, d):
    """Reported bound on the neglected tail's contribution to grad(phi).

    Inside the working window, every neglected impurity sits at distance at
    least cutoff - window, and the counting bound caps how many can sit in
    each unit shell; U-domination then caps each term, giving

        sum <= c_u * c_est * kappa_d * sum_u (u+1)^{d-1}
               * log(2 + window + u + 1) * (1+u^2)^{-alpha}

    over integer shell offsets u >= cutoff - window.
    """
    if not math.isfinite(c_est):
        return math.inf
    gap = max(cutoff_radius - window_radius, 1.0)
    kappa = (2.0**d) * d
    total = 0.0
    u = gap
    while u < gap + 1e6:
        term = ((u + 1.0) ** (d - 1)
                * math.log(2.0 + window_radius + u + 1.0)
                * (1.0 + u * u) ** (-alpha))
        total += term
        if term < 1e-16 * max(total, 1e-300):
            break
        u += 1.0
    return c_u * c_est * kappa * total


def make_random_media(gamma, V_params=None, sigma_spec=None, rho=0.0, dim=None):
    """Particle in a frozen field of impurities with hard-core radius rho.

    The potential sums the pair interaction V over the (finite, truncated)
    impurity configuration ``gamma``; the domain removes the closed
    rho-neighborhood of every impurity. The stored drift is the physical
    one, -(sigma sigma*) grad(phi) plus the divergence correction; the
    certified Lyapunov potential adds the U-tail (V-bar = V + 2U), and the
    difference is the bounded extra drift 2 sum_w (sigma sigma*) grad U(x-w)
    recorded on the coefficient set.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.size == 0:
        if dim is None:
            raise ConfigError(
                "an empty impurity configuration needs an explicit dim"
            )
        gamma = np.zeros((0, int(dim)))
    else:
        if gamma.ndim == 1:
            gamma = gamma.reshape(1, -1)
        if gamma.ndim != 2:
            raise ConfigError("gamma must be an (m, d) array of impurities")
        if dim is not None and int(dim) != gamma.shape[1]:
            raise ConfigError(
                "dim=%d contradicts gamma with %d columns"
                % (int(dim), gamma.shape[1])
            )
    d = gamma.shape[1]
    rho = float(rho)
    if rho < 0.0:
        raise ConfigError("rho must be nonnegative")

    pair = _make_pair_potential(V_params, d, for_media=True, rho=rho)
    c_u, alpha = pair.domination
    diff, k_est, sigma_meta = _make_sigma(sigma_spec, d, require_elliptic=True)
    domain = punctured_space(d, gamma, rho)

    m = gamma.shape[0]

    def phi(t, x):
        x = np.asarray(x, dtype=np.float64)
        acc = 0.0
        for i in range(m):
            acc += pair.V(x - gamma[i])
        return acc

    def grad_phi(t, x):
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros(d)
        for i in range(m):
            g = g + np.asarray(pair.gradV(x - gamma[i]), dtype=np.float64)
        return g

    def zero_dt(t, x):
        return 0.0

    def u_val(y):
        return c_u * (1.0 + float(np.dot(y, y))) ** (-alpha)

    def grad_u(y):
        y = np.asarray(y, dtype=np.float64)
        return (-2.0 * alpha * c_u) * (1.0 + float(np.dot(y, y))) ** (-alpha - 1.0) * y

    def phi_bar(t, x):
        x = np.asarray(x, dtype=np.float64)
        acc = 0.0
        for i in range(m):
            y = x - gamma[i]
            acc += pair.V(y) + 2.0 * u_val(y)
        return acc

    def grad_phi_bar(t, x):
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros(d)
        for i in range(m):
            y = x - gamma[i]
            g = g + np.asarray(pair.gradV(y), dtype=np.float64) + 2.0 * grad_u(y)
        return g

    def drift(t, x):
        x = np.asarray(x, dtype=np.float64)
        a = diff.a(t, x)
        dv = divergence_correction(diff, (t, x), 1e-5)
        return -(a @ grad_phi(t, x)) + dv

    def extra_drift(t, x):
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros(d)
        for i in range(m):
            g = g + grad_u(x - gamma[i])
        return 2.0 * (diff.a(t, x) @ g)

    physical = PotentialField(
        dim=d, phi=phi, grad_phi=grad_phi, dt_phi=zero_dt,
        label="media-pair-sum",
    )
    certified = PotentialField(
        dim=d, phi=phi_bar, grad_phi=grad_phi_bar, dt_phi=zero_dt,
        h=None, epsilon=1.5, K1=0.0, label="media-certified",
    )
    coeffs = CoefficientSet(
        dim=d,
        drift=drift,
        diffusion=diff,
        provenance="gradient-type",
        potential=certified,
        extra_drift=extra_drift,
        k_est=k_est,
    )

    r_list = (0.5, 1.0, 2.0)
    c_req = _required_admissibility_constant(gamma, r_list) if m else 0.0
    notes = []
    report = None
    if m:
        if math.isfinite(c_req):
            report = admissibility_check(gamma, c_req * (1.0 + 1e-9), r_list)
        else:
            report = admissibility_check(gamma, 1.0, r_list)
        if not (math.isfinite(c_req) and report["admissible"]):
            msg = (
                "impurity configuration fails the log counting bound on the "
                "probe set; the non-explosion guarantee is void"
            )
            warnings.warn(msg)
            notes.append("non-admissible configuration")
    cutoff = float(np.max(np.linalg.norm(gamma, axis=1))) if m else 0.0
    window = 0.5 * cutoff
    tail = _tail_gradient_bound(cutoff, window, c_req if m else 0.0,
                                c_u, alpha, d)
    params = {
        "gamma": gamma,
        "rho": rho,
        "dim": d,
        "V": dict(pair.meta),
        "sigma": dict(sigma_meta),
        "U": {"C": c_u, "alpha": alpha},
        "admissibility": report,
        "required_c": c_req,
        "truncation": {
            "cutoff_radius": cutoff,
            "window_radius": window,
            "tail_grad_bound": tail,
        },
    }
    return ModelSpec(
        name="random-media",
        dim=d,
        domain=domain,
        coefficients=coeffs,
        potential=physical,
        params=params,
        analytic_gradient=True,
        analytic_jacobian=True,
        kernel=None,
        default_start=None,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# interacting particles


def make_particle_system(M, d, V_spec=None, sigma_spec=None, C=1.0):
    """M particles in R^d coupled through a pair potential V.

    The state is the concatenation (x^(1), ..., x^(M)) in R^{M d}; the
    domain removes every collision hyperplane x^(k) = x^(j). The diffusion
    is block-diagonal with blocks sigma(x^(k)); the stored drift is the
    physical pairwise gradient dynamics plus the divergence correction. The
    certified potential replaces V by V-bar = V + 2U with the quadratic
    confinement U(y) = C (1+|y|^2); the difference is the extra drift
    b^(k) = 4 C (sigma sigma*)(x^(k)) sum_{j != k} (x^(k) - x^(j)).
    """
    M = int(M)
    dp = int(d)
    if M < 2:
        raise ConfigError("a particle system needs at least M = 2 particles")
    if dp < 1:
        raise ConfigError("particle dimension must be at least 1")
    C = float(C)
    if C <= 0.0:
        raise ConfigError("the confinement constant C must be positive")

    pair = _make_pair_potential(V_spec, dp, for_media=False)
    base, k_base, sigma_meta = _make_sigma(sigma_spec, dp, require_elliptic=True)
    dim = M * dp
    domain = collision_free(M, dp)

    def lift_sigma(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        out = np.zeros((dim, dim))
        for k in range(M):
            sl = slice(k * dp, (k + 1) * dp)
            out[sl, sl] = base(t, pts[k])
        return out

    def lift_jac(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        out = np.zeros((dim, dim, dim))
        for k in range(M):
            jb = np.asarray(base.jacobian(t, pts[k]), dtype=np.float64)
            o = k * dp
            for r in range(dp):
                out[o + r, o:o + dp, o:o + dp] = jb[r]
        return out

    lifted = DiffusionField(dim=dim, sigma=lift_sigma, jacobian=lift_jac,
                            label="block-" + base.label)

    def _pair_gradient(pts, k):
        """d/dx^(k) of sum_{i<j} V(x^(i) - x^(j)), paper sign convention."""
        g = np.zeros(dp)
        for q in range(M):
            if q == k:
                continue
            sgn = 1.0 if q > k else -1.0
            g = g + sgn * np.asarray(
                pair.gradV(sgn * (pts[k] - pts[q])), dtype=np.float64
            )
        return g

    def phi(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        acc = 0.0
        for k in range(M):
            for j in range(k + 1, M):
                acc += pair.V(pts[k] - pts[j])
        return acc

    def grad_phi(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        out = np.empty(dim)
        for k in range(M):
            out[k * dp:(k + 1) * dp] = _pair_gradient(pts, k)
        return out

    def zero_dt(t, x):
        return 0.0

    def phi_bar(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        acc = 0.0
        for k in range(M):
            for j in range(k + 1, M):
                y = pts[k] - pts[j]
                acc += pair.V(y) + 2.0 * C * (1.0 + float(np.dot(y, y)))
        return acc

    def grad_phi_bar(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        out = np.empty(dim)
        for k in range(M):
            g = _pair_gradient(pts, k)
            s = np.zeros(dp)
            for q in range(M):
                if q != k:
                    s = s + (pts[k] - pts[q])
            out[k * dp:(k + 1) * dp] = g + 4.0 * C * s
        return out

    def drift(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        out = np.empty(dim)
        for k in range(M):
            ak = base.a(t, pts[k])
            dv = divergence_correction(base, (t, pts[k]), 1e-5)
            out[k * dp:(k + 1) * dp] = -(ak @ _pair_gradient(pts, k)) + dv
        return out

    def extra_drift(t, x):
        pts = np.asarray(x, dtype=np.float64).reshape(M, dp)
        out = np.empty(dim)
        for k in range(M):
            s = np.zeros(dp)
            for q in range(M):
                if q != k:
                    s = s + (pts[k] - pts[q])
            out[k * dp:(k + 1) * dp] = 4.0 * C * (base.a(t, pts[k]) @ s)
        return out

    physical = PotentialField(
        dim=dim, phi=phi, grad_phi=grad_phi, dt_phi=zero_dt,
        label="particle-pair-sum",
    )
    certified = PotentialField(
        dim=dim, phi=phi_bar, grad_phi=grad_phi_bar, dt_phi=zero_dt,
        h=None, epsilon=1.5, K1=0.0, label="particle-certified",
    )
    coeffs = CoefficientSet(
        dim=dim,
        drift=drift,
        diffusion=lifted,
        provenance="gradient-type",
        potential=certified,
        extra_drift=extra_drift,
        k_est=k_base,
    )
    params = {
        "M": M,
        "d": dp,
        "V": dict(pair.meta),
        "sigma": dict(sigma_meta),
        "C": C,
    }
    return ModelSpec(
        name="particles",
        dim=dim,
        domain=domain,
        coefficients=coeffs,
        potential=physical,
        params=params,
        analytic_gradient=True,
        analytic_jacobian=True,
        kernel=None,
        default_start=None,
    )


# ---------------------------------------------------------------------------
# validation toys


def _linear_diag_model(name, dim, alpha, beta, c, *, potential=None,
                       provenance="direct", oracle=None, params=None,
                       default_start=None):
    """Shared builder for the b = alpha x + beta, sigma = c I family."""

    def drift(t, x):
        return np.array([alpha * float(x[i]) + beta for i in range(dim)])

    eye = np.eye(dim)
    zeros = np.zeros((dim, dim, dim))

    def sigma(t, x):
        return c * eye

    def jac(t, x):
        return zeros

    coeffs = CoefficientSet(
        dim=dim,
        drift=drift,
        diffusion=DiffusionField(dim=dim, sigma=sigma, jacobian=jac,
                                 label="constant"),
        provenance=provenance,
        potential=potential,
        k_est=c * c,
    )
    kernel = None
    if dim <= _KERNEL_MAX_DIM:
        kernel = KernelSpec(KERNEL_LINEAR_DIAG, (alpha, beta, c), 0)
    return ModelSpec(
        name=name,
        dim=dim,
        domain=full_space(dim),
        coefficients=coeffs,
        potential=potential,
        params=dict(params or {}),
        analytic_gradient=potential is not None,
        analytic_jacobian=True,
        oracle=oracle,
        kernel=kernel,
        default_start=default_start,
    )


def _make_bm(dim=1):
    dim = int(dim)
    if dim < 1:
        raise ConfigError("dim must be at least 1")
    return _linear_diag_model(
        "bm", dim, 0.0, 0.0, 1.0,
        oracle={"kind": "bm"},
        params={"dim": dim},
        default_start=(0.0, (0.0,) * dim),
    )


def _make_ou(dim=1):
    dim = int(dim)
    if dim < 1:
        raise ConfigError("dim must be at least 1")

    def phi(t, x):
        acc = 0.0
        for i in range(dim):
            xi = float(x[i])
            acc += xi * xi
        return 0.5 * acc

    def grad_phi(t, x):
        return np.array([float(x[i]) for i in range(dim)])

    def dt_phi(t, x):
        return 0.0

    pot = PotentialField(
        dim=dim, phi=phi, grad_phi=grad_phi, dt_phi=dt_phi,
        h=float(dim), epsilon=0.0, K1=0.0, label="half-square",
    )
    return _linear_diag_model(
        "ou", dim, -1.0, 0.0, 1.0,
        potential=pot,
        provenance="gradient-type",
        oracle={"kind": "ou", "rate": 1.0},
        params={"dim": dim},
        default_start=(0.0, (1.0,) * dim),
    )


def _make_bessel_drift(k=1.0, c=1.0):
    k = float(k)
    c = float(c)
    if k <= 0.0 or c <= 0.0:
        raise ConfigError("bessel-drift requires k > 0 and c > 0")

    def drift(t, x):
        x0 = float(x[0])
        return np.array([-k / x0])

    def sigma(t, x):
        return np.array([[c]])

    def jac(t, x):
        return np.zeros((1, 1, 1))

    coeffs = CoefficientSet(
        dim=1,
        drift=drift,
        diffusion=DiffusionField(dim=1, sigma=sigma, jacobian=jac,
                                 label="constant"),
        provenance="direct",
        k_est=c * c,
    )
    oracle = None
    if k == 1.0 and c == 1.0:
        # E[time to reach 0 from x0] solves (1/2) f'' - f'/x = -1: f = x0^2
        oracle = {"kind": "bessel", "mean_lifetime": "x0**2"}
    return ModelSpec(
        name="bessel-drift",
        dim=1,
        domain=half_space(1),
        coefficients=coeffs,
        params={"k": k, "c": c},
        analytic_gradient=False,
        analytic_jacobian=True,
        oracle=oracle,
        kernel=KernelSpec(KERNEL_BESSEL, (k, c), 1),
        default_start=(0.0, (1.0,)),
    )


def _make_girsanov_toy(theta=0.7):
    """Constant-shift pair: paths run driftless, weights target drift theta."""
    theta = float(theta)
    return _linear_diag_model(
        "girsanov-toy", 1, 0.0, 0.0, 1.0,
        oracle={"kind": "girsanov", "mean_weight": 1.0},
        params={"theta": theta},
        default_start=(0.0, (0.0,)),
    )


def make_validation_toys():
    """The four analytic-oracle toys: bm, ou, bessel-drift, girsanov-toy."""
    return [_make_bm(), _make_ou(), _make_bessel_drift(), _make_girsanov_toy()]


# ---------------------------------------------------------------------------
# registry


def _build_example_611(params):
    if params:
        raise ConfigError(
            "example-6-1-1 takes no parameters (got %r)" % (sorted(params)[0],)
        )
    return make_example_611()


def _build_example_612(params):
    if params:
        raise ConfigError(
            "example-6-1-2 takes no parameters (got %r)" % (sorted(params)[0],)
        )
    return make_example_612()


def _build_example_62(params):
    extra = set(params) - {"delta"}
    if extra:
        raise ConfigError(
            "example-6-2 does not accept parameter %r" % (sorted(extra)[0],)
        )
    return make_example_62(params.get("delta", 0.5))


def _build_random_media(params):
    extra = set(params) - {"gamma", "rho", "V", "sigma", "dim"}
    if extra:
        raise ConfigError(
            "random-media does not accept parameter %r" % (sorted(extra)[0],)
        )
    return make_random_media(
        params.get("gamma", ()),
        V_params=params.get("V"),
        sigma_spec=params.get("sigma"),
        rho=params.get("rho", 0.0),
        dim=params.get("dim"),
    )


def _build_particles(params):
    extra = set(params) - {"M", "d", "V", "sigma", "C"}
    if extra:
        raise ConfigError(
            "particles does not accept parameter %r" % (sorted(extra)[0],)
        )
    if "M" not in params:
        raise ConfigError("particles requires the particle count M")
    return make_particle_system(
        params["M"],
        params.get("d", 1),
        V_spec=params.get("V"),
        sigma_spec=params.get("sigma"),
        C=params.get("C", 1.0),
    )


def _build_bm(params):
    extra = set(params) - {"dim"}
    if extra:
        raise ConfigError("bm does not accept parameter %r" % (sorted(extra)[0],))
    return _make_bm(params.get("dim", 1))


def _build_ou(params):
    extra = set(params) - {"dim"}
    if extra:
        raise ConfigError("ou does not accept parameter %r" % (sorted(extra)[0],))
    return _make_ou(params.get("dim", 1))


def _build_bessel(params):
    extra = set(params) - {"k", "c"}
    if extra:
        raise ConfigError(
            "bessel-drift does not accept parameter %r" % (sorted(extra)[0],)
        )
    return _make_bessel_drift(params.get("k", 1.0), params.get("c", 1.0))


def _build_girsanov(params):
    extra = set(params) - {"theta"}
    if extra:
        raise ConfigError(
            "girsanov-toy does not accept parameter %r" % (sorted(extra)[0],)
        )
    return _make_girsanov_toy(params.get("theta", 0.7))


_REGISTRY = {
    "example-6-1-1": _build_example_611,
    "example-6-1-2": _build_example_612,
    "example-6-2": _build_example_62,
    "random-media": _build_random_media,
    "particles": _build_particles,
    "bm": _build_bm,
    "ou": _build_ou,
    "bessel-drift": _build_bessel,
    "girsanov-toy": _build_girsanov,
}

MODEL_NAMES = tuple(sorted(_REGISTRY))


def build_model(name, params=None):
    """Construct a builtin model by its config name."""
    if name not in _REGISTRY:
        raise ConfigError(
            "unknown model %r (known: %s)" % (name, ", ".join(MODEL_NAMES))
        )
    return _REGISTRY[name](dict(params or {}))
