"""Theorem constants, inequality certificates, and the norm/integral
diagnostics."""

import math

import numpy as np
import pytest

from domsde.coeffs import DiffusionField, PotentialField
from domsde.domain import ProductRegion, Interval, full_space, half_space
from domsde.errors import ConfigError, PreconditionError
from domsde.lyapunov import (
    check_drift_condition,
    check_elliptic_condition,
    h_integral,
    lp_lq_norm,
    theorem_constants,
)
from domsde.models import build_model


# ---------------------------------------------------------------------------
# constants


def test_theorem_constants_frozen_values():
    """epsilon=0, K1=0, K=1, T=1: delta=1/2, mu=1/4, nu=1/48."""
    c = theorem_constants(0.0, 0.0, 1.0, 1.0)
    assert c.delta == 0.5
    assert c.mu == 0.25
    assert math.isclose(c.nu, 1.0 / 48.0, rel_tol=1e-15)


def test_theorem_constants_with_decay():
    """epsilon=1.5, K1=0, K=9, T=1: delta=1/8, mu=1/16, nu=1/1728."""
    c = theorem_constants(1.5, 0.0, 9.0, 1.0)
    assert c.delta == 0.125
    assert c.mu == 0.0625
    assert math.isclose(c.nu, 0.0625 / 108.0, rel_tol=1e-15)


def test_theorem_constants_k1_enters_exponentially():
    c = theorem_constants(0.0, 2.0, 1.0, 3.0)
    want_mu = 0.25 * math.exp(-3.0 * 2.0 / (2.0 * 0.5))
    assert math.isclose(c.mu, want_mu, rel_tol=1e-15)
    assert math.isclose(c.nu, want_mu / 36.0, rel_tol=1e-15)


def test_theorem_constants_validation():
    with pytest.raises(ConfigError):
        theorem_constants(2.0, 0.0, 1.0, 1.0)  # epsilon must be < 2
    with pytest.raises(ConfigError):
        theorem_constants(0.0, -1.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        theorem_constants(0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        theorem_constants(0.0, 0.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# drift-condition certificates


def _time_potential(growth):
    """phi = e^{growth * t} (1 + x^2), with exact time derivative."""
    return PotentialField(
        dim=1,
        phi=lambda t, x: math.exp(growth * t) * (1.0 + float(x[0]) ** 2),
        grad_phi=lambda t, x: np.array(
            [math.exp(growth * t) * 2.0 * float(x[0])]
        ),
        dt_phi=lambda t, x: growth * math.exp(growth * t)
        * (1.0 + float(x[0]) ** 2),
        h=None,
        epsilon=0.0,
        K1=2.0 * growth,
        label="exp-growth",
    )


def test_drift_condition_tightest_constant():
    """2 D_t phi = 2 g phi, so the tightest K1 on any grid is 2 g."""
    region = ProductRegion(0.0, 1.0, [Interval(-2.0, 2.0)])
    cert = check_drift_condition(_time_potential(0.7), region, 9)
    assert cert.verdict == "pass"
    assert math.isclose(cert.tightest_constant, 1.4, rel_tol=1e-12)


def test_drift_condition_declared_constant_infeasible():
    region = ProductRegion(0.0, 1.0, [Interval(-2.0, 2.0)])
    cert = check_drift_condition(_time_potential(0.7), region, 9,
                                 declared_K1=1.0)
    assert cert.verdict == "fail"
    assert cert.declared_feasible is False
    assert cert.n_violations > 0


def test_drift_condition_time_independent_passes_with_zero():
    model = build_model("example-6-2", {"delta": 0.5})
    region = model.domain.exhaustion_level(2)
    cert = check_drift_condition(model.lyapunov_potential, region, 12,
                                 declared_K1=0.0)
    assert cert.verdict == "pass"
    assert cert.tightest_constant == 0.0
    assert cert.declared_feasible is True


# ---------------------------------------------------------------------------
# elliptic-condition certificates


def _quadratic_setup():
    pot = PotentialField(
        dim=2,
        phi=lambda t, x: float(np.dot(x, x)),
        grad_phi=lambda t, x: 2.0 * np.asarray(x, dtype=np.float64),
        dt_phi=lambda t, x: 0.0,
        h=None,
        epsilon=0.0,
        K1=0.0,
        label="|x|^2",
    )
    eye = np.eye(2)
    diff = DiffusionField(
        dim=2,
        sigma=lambda t, x: eye,
        jacobian=lambda t, x: np.zeros((2, 2, 2)),
        label="identity",
    )
    region = ProductRegion(0.0, 1.0, [Interval(-2.0, 2.0)] * 2)
    return pot, diff, region


def test_elliptic_condition_quadratic_passes_at_equality():
    """LHS = Laplacian(|x|^2) = 4 in d=2 and h = 4 holds with zero slack."""
    pot, diff, region = _quadratic_setup()
    cert = check_elliptic_condition(pot, diff, region, 8, 1e-4, h_field=4.0,
                                    epsilon=0.0)
    assert cert.verdict == "pass"
    assert cert.n_violations == 0
    assert cert.max_violation == 0.0
    assert cert.declared_feasible is True
    assert math.isclose(cert.tightest_constant, 4.0, rel_tol=1e-6)


def test_elliptic_condition_quadratic_fails_everywhere_with_h1():
    """h = 1 < 4 = LHS: every evaluated grid point is a violation."""
    pot, diff, region = _quadratic_setup()
    cert = check_elliptic_condition(pot, diff, region, 8, 1e-4, h_field=1.0,
                                    epsilon=0.0)
    assert cert.verdict == "fail"
    assert cert.declared_feasible is False
    assert cert.n_violations == cert.n_points - cert.n_skipped
    assert cert.n_violations == cert.n_points  # nothing skipped here
    assert math.isclose(cert.max_violation, 3.0, rel_tol=1e-6)


def test_elliptic_condition_62_grid_maximized_constant():
    """The singular-potential family passes at epsilon = 3/2 with a finite
    grid-maximized constant when no h is declared."""
    model = build_model("example-6-2", {"delta": 0.5})
    coeffs = model.coefficients
    region = model.domain.exhaustion_level(2)
    cert = check_elliptic_condition(
        coeffs.potential, coeffs.diffusion, region, 16, 1e-4,
        domain=model.domain, h_field=None, epsilon=1.5,
    )
    assert cert.verdict == "pass"
    assert cert.tightest_constant is not None
    assert 0.0 < cert.tightest_constant < 100.0


def test_elliptic_condition_inconclusive_when_stencils_do_not_fit():
    """All grid points hugging the boundary are skipped -> inconclusive."""
    model = build_model("example-6-2", {"delta": 0.5})
    coeffs = model.coefficients
    region = ProductRegion(0.0, 1.0, [Interval(1e-4, 1e-3)])
    cert = check_elliptic_condition(
        coeffs.potential, coeffs.diffusion, region, 6, 0.01,
        domain=model.domain, h_field=None, epsilon=1.5,
    )
    assert cert.verdict == "inconclusive"
    assert cert.n_skipped == cert.n_points
    assert any("skipped" in note for note in cert.notes)


# ---------------------------------------------------------------------------
# condition-(H) integral and mixed norms


def test_h_integral_constant_h_full_space_is_exact():
    """h = 1 on R+ x R: integral = T sqrt(pi/a); the Gaussian proposal
    matches the weight exactly, so the estimator has zero variance."""
    mc = h_integral(1.0, full_space(1), 1.0, 1.0, 2.0, 4000, seed=9)
    assert math.isclose(mc.estimate, math.sqrt(math.pi), rel_tol=1e-12)
    assert mc.std_error <= 1e-15  # zero up to rounding in the sample std


def test_h_integral_halves_on_half_line():
    mc = h_integral(1.0, half_space(1), 1.0, 1.0, 1.0, 20_000, seed=9)
    want = 0.5 * math.sqrt(math.pi)
    assert abs(mc.estimate - want) <= 4.0 * mc.std_error
    assert mc.std_error > 0.0


def test_h_integral_power_scales_constant():
    mc = h_integral(3.0, full_space(1), 2.0, 1.0, 2.0, 1000, seed=4)
    want = 9.0 * 2.0 * math.sqrt(math.pi)  # |3|^2 * T * sqrt(pi)
    assert math.isclose(mc.estimate, want, rel_tol=1e-12)


def test_h_integral_validation():
    with pytest.raises(ConfigError):
        h_integral(1.0, full_space(1), 1.0, 0.0, 1.0, 10, seed=0)
    with pytest.raises(ConfigError):
        h_integral(1.0, full_space(1), 1.0, 1.0, 0.0, 10, seed=0)
    # r = 1 is allowed (boundary of the documented range)
    mc = h_integral(1.0, full_space(1), 1.0, 1.0, 1.0, 100, seed=0)
    assert math.isclose(mc.estimate, math.sqrt(math.pi), rel_tol=1e-12)


def test_h_integral_is_seed_deterministic():
    a = h_integral(2.0, half_space(1), 1.0, 1.0, 1.0, 500, seed=33)
    b = h_integral(2.0, half_space(1), 1.0, 1.0, 1.0, 500, seed=33)
    assert a.estimate == b.estimate
    assert a.std_error == b.std_error


def test_lp_lq_norm_coordinate_oracle():
    """|| x ||_{L^2_2((0,1)x(0,1))} = 1/sqrt(3)."""
    got = lp_lq_norm(lambda t, x: float(x[0]), 0.0, 1.0, [0.0], [1.0],
                     2.0, 2.0, grid_resolution=128)
    assert math.isclose(got, 1.0 / math.sqrt(3.0), rel_tol=1e-4)


def test_lp_lq_norm_indicator_mixed_exponents():
    """Indicator of (0,1)x(-1,1) with p=q=4: (int_0^1 2^{1} dt)^{1/4}."""
    got = lp_lq_norm(lambda t, x: 1.0, 0.0, 1.0, [-1.0], [1.0],
                     4.0, 4.0, grid_resolution=64)
    assert math.isclose(got, 2.0 ** 0.25, rel_tol=1e-12)


def test_lp_lq_norm_is_homogeneous():
    base = lp_lq_norm(lambda t, x: float(x[0]) + t, 0.0, 1.0, [0.0], [1.0],
                      3.0, 5.0, grid_resolution=32)
    scaled = lp_lq_norm(lambda t, x: 7.0 * (float(x[0]) + t), 0.0, 1.0,
                        [0.0], [1.0], 3.0, 5.0, grid_resolution=32)
    assert math.isclose(scaled, 7.0 * base, rel_tol=1e-12)


def test_lp_lq_norm_validation():
    with pytest.raises(PreconditionError):
        lp_lq_norm(lambda t, x: 1.0, 1.0, 1.0, [0.0], [1.0], 2.0, 2.0)
    with pytest.raises(PreconditionError):
        lp_lq_norm(lambda t, x: 1.0, 0.0, 1.0, [0.0], [1.0], 0.5, 2.0)
    with pytest.raises(PreconditionError):
        lp_lq_norm(lambda t, x: 1.0, 0.0, 1.0, [1.0], [0.0], 2.0, 2.0)
