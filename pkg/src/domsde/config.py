"""Run configuration: strict TOML parsing, canonical form, and digest.

A run is described by one TOML document. The numerical content (model and
parameters, start point, horizon, step policy, estimator parameters, seed,
path count) forms the *canonical* part: it is serialized to a stable byte
form whose SHA-256 digest is embedded in every report, with all defaults
materialized first so equivalent configs share a digest. Execution-only
keys (``workers``, ``out``, ``emit_paths``, ``thin``, ``engine``) steer how
the run is carried out but cannot change any estimate, so they are excluded
from the digest; the two lanes of the integrator are bit-identical, which
is what makes ``engine`` execution-only.

Unknown keys are rejected by name at every level, missing required keys and
out-of-range values produce errors naming the key, and
``parse_config(serialize_config(cfg)) == cfg`` holds for every RunConfig.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

try:  # Python >= 3.11
    import tomllib as _toml
except ImportError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

from .errors import ConfigError, PreconditionError
from .integrate import StepPolicy
from .models import MODEL_NAMES, build_model

__all__ = [
    "CONFIG_VERSION",
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "canonical_bytes",
    "config_digest",
]

CONFIG_VERSION = "1"

_ENGINES = ("auto", "python", "compiled")

_TOP_KEYS = {
    "seed", "n_paths", "horizon", "start_time", "start",
    "workers", "out", "emit_paths", "thin", "engine",
    "model", "policy", "estimator",
}

_POLICY_KEYS = {
    "dt_max", "dt_min", "c1", "c2", "tol_xi", "b_max",
    "clip_cap", "max_steps", "fixed_dt",
}

# Estimator keys across all subcommands; each subcommand re-checks its own
# subset, this table only gates typos at parse time.
_ESTIMATOR_FLOAT_KEYS = {
    "T", "S", "p", "q", "K", "epsilon", "K1", "alpha",
    "moll_width", "declared_K1", "h_const", "h_a", "h_r",
}
_ESTIMATOR_INT_KEYS = {
    "n_level", "grid_resolution", "norm_grid", "h_samples",
}
_ESTIMATOR_LIST_KEYS = {"shift", "fields"}
_ESTIMATOR_TABLE_KEYS = {"field"}
_ESTIMATOR_KEYS = (
    _ESTIMATOR_FLOAT_KEYS | _ESTIMATOR_INT_KEYS
    | _ESTIMATOR_LIST_KEYS | _ESTIMATOR_TABLE_KEYS
)


@dataclass(frozen=True, eq=True)
class RunConfig:
    """One fully-defaulted run description.

    ``start`` is the spatial start point, or None to use the model's
    default; ``start_time`` is the time coordinate s of the space-time
    start. The last five fields are execution-only and excluded from the
    digest.
    """

    model_name: str
    model_params: dict = field(default_factory=dict)
    seed: int = 0
    n_paths: int = 1000
    horizon: float = 1.0
    start_time: float = 0.0
    start: Optional[tuple] = None
    policy: StepPolicy = field(default_factory=StepPolicy)
    estimator: dict = field(default_factory=dict)
    workers: int = 1
    out: str = "out"
    emit_paths: bool = False
    thin: int = 1
    engine: str = "auto"

    def build_model(self):
        """Construct the configured model (validates model params)."""
        return build_model(self.model_name, self.model_params)

    def resolved_start(self, model=None):
        """The spatial start actually used: explicit, or model default."""
        if self.start is not None:
            return tuple(float(v) for v in self.start)
        if model is None:
            model = self.build_model()
        if model.default_start is None:
            raise ConfigError(
                "model %r has no default start; set the 'start' key"
                % self.model_name
            )
        return tuple(float(v) for v in model.default_start[1])

    def with_overrides(self, **kw):
        """A copy with the given fields replaced (CLI flag overrides)."""
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# parsing


def _require_int(raw, key, minimum=None):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("key %r must be an integer, got %r" % (key, v))
    if minimum is not None and v < minimum:
        raise ConfigError("key %r must be >= %d, got %d" % (key, minimum, v))
    return v


def _require_float(raw, key):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("key %r must be a number, got %r" % (key, v))
    return float(v)


def _require_str(raw, key):
    v = raw[key]
    if not isinstance(v, str):
        raise ConfigError("key %r must be a string, got %r" % (key, v))
    return v


def _require_bool(raw, key):
    v = raw[key]
    if not isinstance(v, bool):
        raise ConfigError("key %r must be a boolean, got %r" % (key, v))
    return v


def _float_vector(value, key):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("key %r must be a non-empty array of numbers" % key)
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(
                "key %r must contain only numbers, got %r" % (key, v)
            )
        out.append(float(v))
    return tuple(out)


def _normalize(value):
    """Tuples to lists, recursively, so TOML round-trips compare equal."""
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if isinstance(value, dict):
        return {k: _normalize(v) for k, v in value.items()}
    return value


def _parse_policy(table):
    extra = sorted(set(table) - _POLICY_KEYS)
    if extra:
        raise ConfigError("unknown policy key %r" % extra[0])
    kw = {}
    for key in ("dt_max", "dt_min", "c1", "c2", "tol_xi", "b_max"):
        if key in table:
            kw[key] = _require_float(table, key)
    for key in ("clip_cap", "max_steps"):
        if key in table:
            kw[key] = _require_int(table, key, minimum=1)
    if "fixed_dt" in table:
        for key in ("dt_max", "dt_min", "c1", "c2"):
            if key in kw:
                raise ConfigError(
                    "policy key 'fixed_dt' cannot be combined with %r" % key
                )
        dt = _require_float(table, "fixed_dt")
        if dt <= 0.0:
            raise ConfigError("policy key 'fixed_dt' must be positive")
        try:
            return StepPolicy.fixed(dt, **kw)
        except PreconditionError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return StepPolicy(**kw)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_estimator(table):
    extra = sorted(set(table) - _ESTIMATOR_KEYS)
    if extra:
        raise ConfigError("unknown estimator key %r" % extra[0])
    out = {}
    for key, value in table.items():
        if key in _ESTIMATOR_FLOAT_KEYS:
            out[key] = _require_float(table, key)
        elif key in _ESTIMATOR_INT_KEYS:
            out[key] = _require_int(table, key, minimum=1)
        elif key == "shift":
            out[key] = list(_float_vector(value, key))
        elif key == "fields":
            if not isinstance(value, list) or not all(
                isinstance(v, dict) for v in value
            ):
                raise ConfigError(
                    "estimator key 'fields' must be an array of tables"
                )
            out[key] = [_normalize(v) for v in value]
        elif key == "field":
            if not isinstance(value, dict):
                raise ConfigError("estimator key 'field' must be a table")
            out[key] = _normalize(value)
    return out


def parse_config(text):
    """Parse a TOML document (str or bytes) into a RunConfig.

    Rejects unknown keys by name, validates types and ranges, and builds
    the model once so model-parameter errors surface here rather than at
    run time.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not isinstance(text, str):
        raise ConfigError("config source must be TOML text (str or bytes)")
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError("invalid TOML: %s" % exc) from exc

    extra = sorted(set(raw) - _TOP_KEYS)
    if extra:
        raise ConfigError("unknown configuration key %r" % extra[0])
    if "model" not in raw:
        raise ConfigError("missing required key 'model'")
    model_tbl = raw["model"]
    if not isinstance(model_tbl, dict):
        raise ConfigError("key 'model' must be a table")
    extra = sorted(set(model_tbl) - {"name", "params"})
    if extra:
        raise ConfigError("unknown model key %r" % extra[0])
    if "name" not in model_tbl:
        raise ConfigError("missing required key 'model.name'")
    name = _require_str(model_tbl, "name")
    if name not in MODEL_NAMES:
        raise ConfigError(
            "model name %r is not registered (known: %s)"
            % (name, ", ".join(MODEL_NAMES))
        )
    params = model_tbl.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("key 'model.params' must be a table")
    params = _normalize(params)

    kw = {"model_name": name, "model_params": params}
    if "seed" in raw:
        kw["seed"] = _require_int(raw, "seed", minimum=0)
    if "n_paths" in raw:
        kw["n_paths"] = _require_int(raw, "n_paths", minimum=1)
    if "horizon" in raw:
        horizon = _require_float(raw, "horizon")
        if horizon <= 0.0:
            raise ConfigError("key 'horizon' must be positive")
        kw["horizon"] = horizon
    if "start_time" in raw:
        s = _require_float(raw, "start_time")
        if s < 0.0:
            raise ConfigError("key 'start_time' must be nonnegative")
        kw["start_time"] = s
    if "start" in raw:
        kw["start"] = _float_vector(raw["start"], "start")
    if "workers" in raw:
        kw["workers"] = _require_int(raw, "workers", minimum=1)
    if "out" in raw:
        kw["out"] = _require_str(raw, "out")
    if "emit_paths" in raw:
        kw["emit_paths"] = _require_bool(raw, "emit_paths")
    if "thin" in raw:
        kw["thin"] = _require_int(raw, "thin", minimum=1)
    if "engine" in raw:
        engine = _require_str(raw, "engine")
        if engine not in _ENGINES:
            raise ConfigError(
                "key 'engine' must be one of %s, got %r"
                % (" | ".join(_ENGINES), engine)
            )
        kw["engine"] = engine
    if "policy" in raw:
        if not isinstance(raw["policy"], dict):
            raise ConfigError("key 'policy' must be a table")
        kw["policy"] = _parse_policy(raw["policy"])
    if "estimator" in raw:
        if not isinstance(raw["estimator"], dict):
            raise ConfigError("key 'estimator' must be a table")
        kw["estimator"] = _parse_estimator(raw["estimator"])

    cfg = RunConfig(**kw)
    model = cfg.build_model()  # strict model-parameter validation
    if cfg.start is not None and len(cfg.start) != model.dim:
        raise ConfigError(
            "key 'start' has %d coordinates but model %r has dimension %d"
            % (len(cfg.start), name, model.dim)
        )
    return cfg


def load_config(path):
    """Read and parse a TOML config file."""
    with open(path, "rb") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# canonical serialization


def _toml_key(key):
    if key and all(c.isalnum() or c in "-_" for c in key):
        return key
    return '"%s"' % key.replace("\\", "\\\\").replace('"', '\\"')


def _toml_scalar(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t")
        return '"%s"' % escaped
    if isinstance(value, (list, tuple)):
        return "[%s]" % ", ".join(_toml_scalar(v) for v in value)
    if isinstance(value, dict):  # inline table (inside arrays)
        inner = ", ".join(
            "%s = %s" % (_toml_key(k), _toml_scalar(v))
            for k, v in value.items()
        )
        return "{%s}" % inner
    raise ConfigError("cannot serialize value %r to TOML" % (value,))


def _emit_table(path, table, lines):
    scalars = [(k, v) for k, v in table.items() if not isinstance(v, dict)]
    subs = [(k, v) for k, v in table.items() if isinstance(v, dict)]
    if path:
        if lines:
            lines.append("")
        lines.append("[%s]" % path)
    for k, v in scalars:
        lines.append("%s = %s" % (_toml_key(k), _toml_scalar(v)))
    for k, v in subs:
        _emit_table("%s.%s" % (path, _toml_key(k)) if path else _toml_key(k),
                    v, lines)


def serialize_config(cfg):
    """Render a RunConfig as TOML; parse_config(result) == cfg."""
    top = {
        "seed": cfg.seed,
        "n_paths": cfg.n_paths,
        "horizon": float(cfg.horizon),
        "start_time": float(cfg.start_time),
        "workers": cfg.workers,
        "out": cfg.out,
        "emit_paths": cfg.emit_paths,
        "thin": cfg.thin,
        "engine": cfg.engine,
    }
    if cfg.start is not None:
        top["start"] = [float(v) for v in cfg.start]
    lines = []
    _emit_table("", top, lines)
    model = {"name": cfg.model_name}
    if cfg.model_params:
        model["params"] = _normalize(cfg.model_params)
    _emit_table("model", model, lines)
    pol = cfg.policy
    _emit_table("policy", {
        "dt_max": float(pol.dt_max),
        "dt_min": float(pol.dt_min),
        "c1": float(pol.c1),
        "c2": float(pol.c2),
        "tol_xi": float(pol.tol_xi),
        "b_max": float(pol.b_max),
        "clip_cap": int(pol.clip_cap),
        "max_steps": int(pol.max_steps),
    }, lines)
    if cfg.estimator:
        _emit_table("estimator", _normalize(cfg.estimator), lines)
    return "\n".join(lines) + "\n"


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
    return value


def canonical_dict(cfg):
    """The digest content: numerical inputs with all defaults materialized.

    Model parameters are taken from the *built* model so omitted parameters
    digest identically to explicitly written defaults, and the start point
    is resolved the same way.
    """
    model = cfg.build_model()
    pol = cfg.policy
    return {
        "config_version": CONFIG_VERSION,
        "model": {"name": cfg.model_name, "params": _jsonable(model.params)},
        "seed": cfg.seed,
        "n_paths": cfg.n_paths,
        "horizon": float(cfg.horizon),
        "start_time": float(cfg.start_time),
        "start": (
            list(cfg.resolved_start(model))
            if cfg.start is not None or model.default_start is not None
            else None
        ),
        "policy": _jsonable(pol.to_json_dict()),
        "estimator": _jsonable(cfg.estimator),
    }


def canonical_bytes(cfg):
    """Stable byte form of the canonical dict (sorted keys, no whitespace)."""
    return json.dumps(
        canonical_dict(cfg), sort_keys=True, separators=(",", ":"),
        allow_nan=False,
    ).encode("utf-8")


def config_digest(cfg):
    """SHA-256 hex digest of the canonical byte form."""
    return hashlib.sha256(canonical_bytes(cfg)).hexdigest()
