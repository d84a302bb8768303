"""Simulation and diagnostics for SDEs with singular drift on space-time
domains.

The toolkit simulates maximal local solutions of

    dX_t = b(t, X_t) dt + sigma(t, X_t) dW_t,    X killed on leaving Q,

for open space-time domains Q, with the life time xi detected by adaptive
stepping and bisection, and estimates the quantities that appear in the
corresponding moment and occupation bounds: explosion probabilities,
sup-exponential moments, Krylov-type occupation ratios, run-counter
moments and change-of-measure weights. Gradient-type drifts built from a
potential come with grid checkers for the Lyapunov-type inequalities the
bounds require.

Subpackages and modules:

- ``domain``: space-time domains Q, exhaustions Q^n, cemetery state.
- ``coeffs``: drift/diffusion fields, gradient-type construction,
  divergence correction, localization.
- ``lyapunov``: inequality checkers, theorem constants, norms/integrals.
- ``integrate``: the Euler scheme (compiled and pure-Python lanes).
- ``estimators``: Monte Carlo estimators and reports.
- ``models``: the built-in model catalog.
- ``config`` / ``cli``: TOML run configs and the command-line interface.
"""

from .errors import (
    ConfigError,
    DimensionMismatchError,
    DomsdeError,
    EmptyRegionError,
    PreconditionError,
    SingularDiffusionError,
    SingularityError,
    StencilError,
)
from .domain import (
    CEMETERY,
    SpaceTimeDomain,
    SpaceTimePoint,
    box_domain,
    collision_free,
    from_predicate,
    full_space,
    half_space,
    punctured_plane,
    punctured_space,
)
from .coeffs import (
    CoefficientSet,
    DiffusionField,
    PotentialField,
    build_gradient_drift,
    divergence_correction,
    ellipticity_bounds,
    localize,
)
from .lyapunov import (
    LyapunovCertificate,
    TheoremConstants,
    check_drift_condition,
    check_elliptic_condition,
    h_integral,
    lp_lq_norm,
    theorem_constants,
)
from .integrate import (
    HAVE_KERNELS,
    PathRecord,
    StepPolicy,
    Survived,
    run_counter,
    simulate_path,
    simulate_paths,
    step_size,
)
from .estimators import (
    FieldSpec,
    MonteCarloReport,
    explosion_probability,
    exp_functional,
    girsanov_weight,
    krylov_ratio,
    make_field,
    reweighted_mean,
    run_moment,
    sup_exp_moment,
)
from .models import MODEL_NAMES, ModelSpec, build_model
from .config import (
    RunConfig,
    config_digest,
    load_config,
    parse_config,
    serialize_config,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DomsdeError",
    "ConfigError",
    "DimensionMismatchError",
    "PreconditionError",
    "SingularityError",
    "StencilError",
    "EmptyRegionError",
    "SingularDiffusionError",
    # domain
    "CEMETERY",
    "SpaceTimePoint",
    "SpaceTimeDomain",
    "full_space",
    "half_space",
    "box_domain",
    "punctured_plane",
    "punctured_space",
    "collision_free",
    "from_predicate",
    # coefficients
    "DiffusionField",
    "PotentialField",
    "CoefficientSet",
    "build_gradient_drift",
    "divergence_correction",
    "localize",
    "ellipticity_bounds",
    # lyapunov
    "TheoremConstants",
    "theorem_constants",
    "LyapunovCertificate",
    "check_drift_condition",
    "check_elliptic_condition",
    "h_integral",
    "lp_lq_norm",
    # integrate
    "HAVE_KERNELS",
    "StepPolicy",
    "PathRecord",
    "Survived",
    "simulate_path",
    "simulate_paths",
    "step_size",
    "run_counter",
    # estimators
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
    # models
    "ModelSpec",
    "MODEL_NAMES",
    "build_model",
    # config
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_digest",
]
