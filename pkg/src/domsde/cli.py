"""Command-line interface for the simulation and diagnostics toolkit.

Usage: ``domsde <subcommand> -c config.toml [--seed N] [--workers N]
[--out DIR] [--paths | --no-paths]``.

Subcommands: ``simulate`` (trajectories to CSV plus a summary report),
``lifetime`` (explosion probability), ``moments`` (sub-Gaussian
sup-exponential moment), ``check-lyapunov`` (grid certificates for the
drift and elliptic inequalities plus the optional integrability check),
``krylov`` (occupation-to-norm ratios), ``runs`` (run-counter moment),
``girsanov`` (change-of-measure weights and a reweighted cross-check),
``norm`` (mixed-norm quadrature), ``constants`` (the theorem constants).

Every subcommand writes ``<out>/<subcommand>.json``. Reports are
deterministic: keys are sorted, non-finite floats are encoded as strings,
and nothing execution-dependent (worker count, timestamps) is embedded, so
a given config produces byte-identical reports for any ``--workers``.

Exit status: 0 on success; 1 when the report's validity flag is false
(estimate contaminated) or a certificate verdict is not "pass"; 2 on
configuration or usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import config_digest, load_config
from .errors import ConfigError, DomsdeError
from .estimators import (
    REPORT_VERSION,
    MonteCarloReport,
    explosion_probability,
    girsanov_weight,
    krylov_ratio,
    make_field,
    reweighted_mean,
    run_moment,
    sup_exp_moment,
)
from .integrate import resolve_engine, simulate_paths
from .lyapunov import (
    check_drift_condition,
    check_elliptic_condition,
    h_integral,
    lp_lq_norm,
    theorem_constants,
)

__all__ = ["main", "run"]

PROG = "domsde"


# ---------------------------------------------------------------------------
# deterministic report / trajectory writers


def _sanitize(obj):
    """JSON-safe copy: non-finite floats become strings, numpy unwrapped."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    return obj


def _write_json(path, doc):
    body = json.dumps(_sanitize(doc), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(body)


def _report_path(cfg, command):
    return os.path.join(cfg.out, "%s.json" % command)


def _doc(cfg, command, payload):
    doc = {
        "subcommand": command,
        "version": REPORT_VERSION,
        "config_digest": config_digest(cfg),
        "model": cfg.model_name,
    }
    doc.update(payload)
    return doc


def _write_paths_csv(path, records, thin):
    """Trajectories as CSV rows (path_id, t, x_1..x_d, alive).

    Recorded in-domain states carry alive=1; a killed path gets one final
    row at its exit time with the crossing state and alive=0. Thinning
    keeps every ``thin``-th recorded point plus the first and last.
    """
    if not records:
        raise ConfigError("no trajectories to write")
    dim = records[0].dim
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cols = ["path_id", "t"] + ["x_%d" % (i + 1) for i in range(dim)]
        fh.write(",".join(cols + ["alive"]) + "\n")
        for rec in records:
            n = rec.times.shape[0]
            for k in range(n):
                if thin > 1 and k % thin and k != n - 1:
                    continue
                row = [str(rec.path_index), repr(rec.s + float(rec.times[k]))]
                row += [repr(float(rec.states[k][i])) for i in range(dim)]
                fh.write(",".join(row + ["1"]) + "\n")
            if rec.killed:
                row = [str(rec.path_index), repr(rec.s + float(rec.xi))]
                row += [repr(float(rec.exit_state[i])) for i in range(dim)]
                fh.write(",".join(row + ["0"]) + "\n")


def _simulate_records(cfg, model, horizon, record_dw=False):
    start = (cfg.start_time, cfg.resolved_start(model))
    return simulate_paths(
        model.coefficients, model.domain, start, horizon, cfg.policy,
        cfg.seed, cfg.n_paths, workers=cfg.workers, engine=cfg.engine,
        kernel=model.kernel, record_dw=record_dw,
    )


def _maybe_emit_paths(cfg, model, horizon, records=None):
    """Write paths.csv when requested; reuses records when already in hand.

    Estimator subcommands re-simulate with the same seed and stream family,
    which reproduces exactly the trajectories their estimates consumed.
    """
    if not cfg.emit_paths:
        return None
    if records is None:
        records = _simulate_records(cfg, model, horizon)
    csv_path = os.path.join(cfg.out, "paths.csv")
    _write_paths_csv(csv_path, records, cfg.thin)
    return csv_path


def _estimator_table(cfg, allowed, command):
    extra = sorted(set(cfg.estimator) - set(allowed))
    if extra:
        raise ConfigError(
            "estimator key %r does not apply to subcommand %s"
            % (extra[0], command)
        )
    return cfg.estimator


def _require_est(est, key, command):
    if key not in est:
        raise ConfigError(
            "missing required estimator key %r for subcommand %s"
            % (key, command)
        )
    return est[key]


def _print_report(rep):
    flag = "valid" if rep.valid else "INVALID"
    print("%s = %r +- %r  (n=%d, ess=%.1f, %s)" % (
        rep.estimand, rep.estimate, rep.std_error, rep.n_paths,
        rep.effective_sample_size, flag,
    ))
    for w in rep.warnings:
        print("  warning: %s" % w)


def _finish(cfg, command, payload, ok):
    path = _report_path(cfg, command)
    _write_json(path, _doc(cfg, command, payload))
    print("wrote %s" % path)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(cfg):
    _estimator_table(cfg, (), "simulate")
    model = cfg.build_model()
    records = _simulate_records(cfg, model, cfg.horizon)
    csv_path = _maybe_emit_paths(cfg, model, cfg.horizon, records=records)

    n = len(records)
    n_killed = sum(1 for r in records if r.killed)
    n_unres = sum(1 for r in records if r.unresolved)
    lifetimes = sorted(float(r.xi) for r in records if r.killed)
    summary = {
        "engine": resolve_engine(cfg.engine, model.kernel),
        "n_paths": n,
        "n_killed": n_killed,
        "n_survived": n - n_killed - n_unres,
        "n_unresolved": n_unres,
        "horizon": float(cfg.horizon),
        "total_substeps": sum(r.substeps for r in records),
        "min_boundary_distance": min(
            (r.min_boundary_distance for r in records), default=math.inf
        ),
        "paths_csv": csv_path,
    }
    if lifetimes:
        summary["lifetimes"] = {
            "n_killed": n_killed,
            "min": lifetimes[0],
            "median": lifetimes[len(lifetimes) // 2],
            "max": lifetimes[-1],
            "mean": float(np.mean(lifetimes)),
        }
    ok = n_unres <= 0.01 * n
    print("simulated %d path(s): %d killed, %d unresolved" % (
        n, n_killed, n_unres,
    ))
    return _finish(cfg, "simulate", summary, ok)


def _cmd_lifetime(cfg):
    est = _estimator_table(cfg, ("T",), "lifetime")
    model = cfg.build_model()
    T = float(est.get("T", cfg.horizon))
    rep = explosion_probability(
        model, (cfg.start_time, cfg.resolved_start(model)), T, cfg.n_paths,
        policy=cfg.policy, seed=cfg.seed, workers=cfg.workers,
        engine=cfg.engine, config_digest=config_digest(cfg),
    )
    _maybe_emit_paths(cfg, model, T)
    _print_report(rep)
    return _finish(cfg, "lifetime", {"report": rep.to_json_dict()}, rep.valid)


def _moment_constants(cfg, est, model, command):
    pot = model.lyapunov_potential
    if "epsilon" in est:
        epsilon = float(est["epsilon"])
    elif pot is not None:
        epsilon = pot.epsilon
    else:
        raise ConfigError(
            "model %r declares no potential; set estimator key 'epsilon' "
            "for subcommand %s" % (cfg.model_name, command)
        )
    if "K1" in est:
        K1 = float(est["K1"])
    elif pot is not None:
        K1 = pot.K1
    else:
        raise ConfigError(
            "model %r declares no potential; set estimator key 'K1' "
            "for subcommand %s" % (cfg.model_name, command)
        )
    K = float(est.get("K", model.coefficients.k_est))
    T = float(est.get("T", cfg.horizon))
    return theorem_constants(epsilon, K1, K, T)


def _cmd_moments(cfg):
    est = _estimator_table(cfg, ("T", "K", "epsilon", "K1"), "moments")
    model = cfg.build_model()
    consts = _moment_constants(cfg, est, model, "moments")
    rep = sup_exp_moment(
        model, consts, (cfg.start_time, cfg.resolved_start(model)), consts.T,
        cfg.n_paths, policy=cfg.policy, seed=cfg.seed, workers=cfg.workers,
        engine=cfg.engine, config_digest=config_digest(cfg),
    )
    _maybe_emit_paths(cfg, model, consts.T)
    _print_report(rep)
    payload = {
        "report": rep.to_json_dict(),
        "constants": consts.to_json_dict(),
    }
    return _finish(cfg, "moments", payload, rep.valid)


def _cmd_constants(cfg):
    est = _estimator_table(cfg, ("T", "K", "epsilon", "K1"), "constants")
    model = cfg.build_model()
    consts = _moment_constants(cfg, est, model, "constants")
    print("delta = %r, mu = %r, nu = %r" % (consts.delta, consts.mu, consts.nu))
    return _finish(cfg, "constants", {"constants": consts.to_json_dict()}, True)


def _cmd_check_lyapunov(cfg):
    est = _estimator_table(
        cfg,
        ("n_level", "grid_resolution", "moll_width", "declared_K1",
         "h_const", "epsilon", "T", "h_a", "h_r", "h_samples"),
        "check-lyapunov",
    )
    model = cfg.build_model()
    pot = model.lyapunov_potential
    if pot is None:
        raise ConfigError(
            "model %r declares no potential to check" % cfg.model_name
        )
    n_level = int(est.get("n_level", 2))
    grid = int(est.get("grid_resolution", 24))
    moll = float(est.get("moll_width", 1e-3))
    region = model.domain.exhaustion_level(n_level)

    drift_cert = check_drift_condition(
        pot, region, grid, declared_K1=float(est.get("declared_K1", pot.K1)),
    )
    h_field = est.get("h_const", pot.h)
    ell_cert = check_elliptic_condition(
        pot, model.coefficients.diffusion, region, grid, moll,
        domain=model.domain, h_field=h_field,
        epsilon=float(est.get("epsilon", pot.epsilon)),
    )

    condition_h = None
    if "h_a" in est:
        hf = h_field if h_field is not None else ell_cert.tightest_constant
        if hf is None:
            raise ConfigError(
                "no h to integrate: the elliptic check found no finite "
                "constant and no 'h_const' was declared"
            )
        condition_h = h_integral(
            hf, model.domain, float(est.get("T", cfg.horizon)),
            float(est["h_a"]), float(est.get("h_r", 1.0)),
            int(est.get("h_samples", 20000)), cfg.seed,
        ).to_json_dict()

    verdicts = (drift_cert.verdict, ell_cert.verdict)
    if "inconclusive" in verdicts:
        overall = "inconclusive"
    elif verdicts == ("pass", "pass"):
        overall = "pass"
    else:
        overall = "fail"
    payload = {
        "verdict": overall,
        "n_level": n_level,
        "drift": drift_cert.to_json_dict(),
        "elliptic": ell_cert.to_json_dict(),
        "condition_h": condition_h,
        "constants": _moment_constants(cfg, {}, model,
                                       "check-lyapunov").to_json_dict(),
    }
    print("check-lyapunov: drift=%s elliptic=%s -> %s" % (
        drift_cert.verdict, ell_cert.verdict, overall,
    ))
    return _finish(cfg, "check-lyapunov", payload, overall == "pass")


def _cmd_krylov(cfg):
    est = _estimator_table(
        cfg, ("fields", "S", "T", "p", "q", "norm_grid"), "krylov",
    )
    model = cfg.build_model()
    fields = _require_est(est, "fields", "krylov")
    p = _require_est(est, "p", "krylov")
    q = _require_est(est, "q", "krylov")
    S = float(est.get("S", 0.0))
    T = float(est.get("T", cfg.horizon))
    out = krylov_ratio(
        model, fields, S, T, float(p), float(q), cfg.n_paths, seed=cfg.seed,
        policy=cfg.policy, start=(cfg.start_time, cfg.resolved_start(model)),
        workers=cfg.workers, engine=cfg.engine,
        config_digest=config_digest(cfg),
        norm_grid=int(est.get("norm_grid", 128)),
    )
    _maybe_emit_paths(cfg, model, T)
    for rep in out["members"]:
        _print_report(rep)
    payload = {
        "members": [rep.to_json_dict() for rep in out["members"]],
        "max_ratio": out["max_ratio"],
        "max_label": out["max_label"],
    }
    ok = bool(out["members"]) and all(r.valid for r in out["members"])
    return _finish(cfg, "krylov", payload, ok)


def _cmd_runs(cfg):
    est = _estimator_table(cfg, ("S", "n_level", "alpha"), "runs")
    model = cfg.build_model()
    S = float(est.get("S", cfg.horizon))
    rep = run_moment(
        model, (cfg.start_time, cfg.resolved_start(model)), S,
        int(est.get("n_level", 1)), float(est.get("alpha", 0.25)),
        cfg.n_paths, seed=cfg.seed, policy=cfg.policy, workers=cfg.workers,
        engine=cfg.engine, config_digest=config_digest(cfg),
    )
    _maybe_emit_paths(cfg, model, S)
    _print_report(rep)
    return _finish(cfg, "runs", {"report": rep.to_json_dict()}, rep.valid)


def _cmd_girsanov(cfg):
    est = _estimator_table(cfg, ("T", "shift"), "girsanov")
    model = cfg.build_model()
    T = float(est.get("T", cfg.horizon))
    if "shift" in est:
        shift = np.asarray([float(v) for v in est["shift"]], dtype=np.float64)
        if shift.shape[0] != model.dim:
            raise ConfigError(
                "estimator key 'shift' has %d coordinates but model %r has "
                "dimension %d" % (shift.shape[0], cfg.model_name, model.dim)
            )
    elif "theta" in model.params:
        shift = np.full(model.dim, float(model.params["theta"]))
    else:
        raise ConfigError(
            "missing required estimator key 'shift' for subcommand girsanov"
        )

    records = _simulate_records(cfg, model, T, record_dw=True)
    csv_path = _maybe_emit_paths(cfg, model, T, records=records)
    b1 = model.coefficients.drift_at

    def b2(t, x):
        return np.asarray(b1(t, x), dtype=np.float64).reshape(-1) + shift

    weights = []
    terminals = []
    n_unres = 0
    for rec in records:
        if rec.unresolved:
            n_unres += 1
            continue
        weights.append(girsanov_weight(rec, b1, b2,
                                       model.coefficients.sigma_at))
        last = rec.exit_state if rec.killed else rec.states[-1]
        terminals.append(float(last[0]))
    weights = np.asarray(weights, dtype=np.float64)
    terminals = np.asarray(terminals, dtype=np.float64)
    if not weights.size:
        raise ConfigError(
            "every path was unresolved; no change-of-measure weights formed"
        )

    mean_w, se_w, ess = reweighted_mean(np.ones_like(weights), weights)
    rew_est, rew_se, _ = reweighted_mean(terminals, weights)
    n_used = weights.shape[0]
    direct = float(np.mean(terminals)) if n_used else math.nan
    direct_se = (
        float(np.std(terminals, ddof=1) / math.sqrt(n_used))
        if n_used > 1 else 0.0
    )

    warns = []
    valid = True
    if n_unres:
        warns.append("%d unresolved path(s) excluded" % n_unres)
        if n_unres > 0.01 * len(records):
            warns.append("more than 1% of paths unresolved; "
                         "estimate unreliable")
            valid = False
    if n_used and not np.all(np.isfinite(weights)):
        warns.append("non-finite change-of-measure weights present")
        valid = False
    rep = MonteCarloReport(
        estimand="girsanov_mean_weight",
        estimate=mean_w,
        std_error=se_w,
        n_paths=len(records),
        effective_sample_size=ess,
        seed=cfg.seed,
        config_digest=config_digest(cfg),
        engine=resolve_engine(cfg.engine, model.kernel),
        n_unresolved=n_unres,
        warnings=tuple(warns),
        valid=valid,
        extra={
            "T": T,
            "shift": [float(v) for v in shift],
            "reweighted_terminal_mean": rew_est,
            "reweighted_terminal_se": rew_se,
            "direct_terminal_mean": direct,
            "direct_terminal_se": direct_se,
            "paths_csv": csv_path,
        },
    )
    _print_report(rep)
    return _finish(cfg, "girsanov", {"report": rep.to_json_dict()}, rep.valid)


def _cmd_norm(cfg):
    est = _estimator_table(
        cfg, ("field", "S", "T", "p", "q", "grid_resolution"), "norm",
    )
    model = cfg.build_model()
    spec = _require_est(est, "field", "norm")
    p = float(_require_est(est, "p", "norm"))
    q = float(_require_est(est, "q", "norm"))
    S = float(est.get("S", 0.0))
    T = float(est.get("T", cfg.horizon))
    f = make_field(spec, model.dim)
    grid = int(est.get("grid_resolution", 128))
    value = lp_lq_norm(f, S, T, f.x_lo, f.x_hi, p, q, grid_resolution=grid)
    payload = {
        "estimand": "lp_lq_norm",
        "value": float(value),
        "field": spec,
        "p": p,
        "q": q,
        "S": S,
        "T": T,
        "grid_resolution": grid,
    }
    print("lp_lq_norm = %r" % (float(value),))
    return _finish(cfg, "norm", payload, True)


_HANDLERS = {
    "simulate": _cmd_simulate,
    "lifetime": _cmd_lifetime,
    "moments": _cmd_moments,
    "check-lyapunov": _cmd_check_lyapunov,
    "krylov": _cmd_krylov,
    "runs": _cmd_runs,
    "girsanov": _cmd_girsanov,
    "norm": _cmd_norm,
    "constants": _cmd_constants,
}

_HELP = {
    "simulate": "simulate trajectories and write them as CSV",
    "lifetime": "estimate the explosion probability P(xi <= T)",
    "moments": "estimate the sub-Gaussian sup-exponential moment",
    "check-lyapunov": "grid-check the drift/elliptic Lyapunov inequalities",
    "krylov": "estimate occupation-integral-to-norm ratios",
    "runs": "estimate the run-counter moment between exhaustion levels",
    "girsanov": "compute change-of-measure weights and a reweighted mean",
    "norm": "compute the mixed (p, q) norm of a truncated field",
    "constants": "print the moment-bound constants delta, mu, nu",
}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog=PROG,
        description="simulation and diagnostics for SDEs with singular "
                    "drift on space-time domains",
    )
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    for name in _HANDLERS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("-c", "--config", required=True,
                       help="path to the TOML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
        p.add_argument("--workers", type=int, default=None,
                       help="override the configured worker count")
        p.add_argument("--out", default=None,
                       help="override the configured output directory")
        grp = p.add_mutually_exclusive_group()
        grp.add_argument("--paths", dest="paths", action="store_true",
                         default=None, help="also write trajectories as CSV")
        grp.add_argument("--no-paths", dest="paths", action="store_false",
                         help="suppress the trajectory CSV")
    return ap


def run(command, cfg):
    """Execute one subcommand against a parsed RunConfig; returns exit code."""
    if command not in _HANDLERS:
        raise ConfigError("unknown subcommand %r" % command)
    return _HANDLERS[command](cfg)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        if args.out is not None:
            overrides["out"] = args.out
        if args.paths is not None:
            overrides["emit_paths"] = args.paths
        elif args.command == "simulate":
            overrides["emit_paths"] = True
        if overrides:
            cfg = cfg.with_overrides(**overrides)
        return run(args.command, cfg)
    except DomsdeError as exc:
        print("%s: error: %s" % (PROG, exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print("%s: error: %s" % (PROG, exc), file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
