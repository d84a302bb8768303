"""Coefficient fields: gradient-type drift, divergence correction,
localization, and ellipticity bounds."""

import math

import numpy as np
import pytest

from domsde.coeffs import (
    CoefficientSet,
    DiffusionField,
    PotentialField,
    build_gradient_drift,
    divergence_correction,
    ellipticity_bounds,
    localize,
)
from domsde.domain import full_space, half_space
from domsde.errors import (
    PreconditionError,
    SingularityError,
    StencilError,
)
from domsde.models import build_model


def _unit_diffusion(dim):
    eye = np.eye(dim)
    zeros = np.zeros((dim, dim, dim))
    return DiffusionField(
        dim=dim,
        sigma=lambda t, x: eye,
        jacobian=lambda t, x: zeros,
        label="identity",
    )


def _quadratic_potential(dim):
    return PotentialField(
        dim=dim,
        phi=lambda t, x: 0.5 * float(np.dot(x, x)),
        grad_phi=lambda t, x: np.asarray(x, dtype=np.float64).copy(),
        dt_phi=lambda t, x: 0.0,
        h=None,
        epsilon=0.0,
        K1=0.0,
        label="|x|^2/2",
    )


def test_gradient_drift_quadratic_potential_is_minus_x():
    """phi = |x|^2/2, sigma = I: drift -a grad(phi) + correction == -x."""
    pot = _quadratic_potential(2)
    diff = _unit_diffusion(2)
    b = build_gradient_drift(pot, diff, (0.3, [1.5, -2.0]))
    np.testing.assert_allclose(b, [-1.5, 2.0], rtol=1e-12)


def test_divergence_correction_analytic_jacobian():
    """sigma = 1/(1+x^2) in 1-d: (1/2) a'(x) = -2x (1+x^2)^{-3}."""
    model = build_model("example-6-1-1")
    diff = model.coefficients.diffusion
    got = divergence_correction(diff, (0.0, [1.0]), fd_step=1e-5)
    assert math.isclose(got[0], -2.0 / 8.0, rel_tol=1e-9)


def test_divergence_correction_fd_matches_analytic():
    """Central differences agree with the analytic jacobian to O(h^2)."""

    def sigma(t, x):
        return np.array([[1.0 / (1.0 + float(x[0]) ** 2)]])

    fd_only = DiffusionField(dim=1, sigma=sigma, label="no-jacobian")
    got = divergence_correction(fd_only, (0.0, [1.0]), fd_step=1e-5)
    assert math.isclose(got[0], -0.25, rel_tol=1e-7)


def test_divergence_correction_respects_clearance():
    diff = _unit_diffusion(1)
    with pytest.raises(StencilError):
        divergence_correction(diff, (0.0, [1.0]), fd_step=0.5, clearance=0.1)


def test_gradient_drift_singularity_detected():
    """grad(phi) blowing up at the evaluation point raises, not NaN."""
    pot = PotentialField(
        dim=1,
        phi=lambda t, x: abs(float(x[0])) ** -0.5,
        grad_phi=lambda t, x: np.array([math.inf]),
        dt_phi=lambda t, x: 0.0,
        h=None,
        epsilon=1.5,
        K1=0.0,
        label="singular",
    )
    with pytest.raises(SingularityError):
        build_gradient_drift(pot, _unit_diffusion(1), (0.0, [0.0]), fd_step=1e-6)


def test_example_62_drift_matches_hand_value():
    """Drift at x = 1 equals -(2+sin 1)^2 * 1/2 + (2+sin 1) cos 1."""
    model = build_model("example-6-2", {"delta": 0.5})
    q = 2.0 + math.sin(1.0)
    want = -0.5 * q * q + q * math.cos(1.0)
    got = model.coefficients.drift_at(0.5, np.array([1.0]))
    assert math.isclose(float(got[0]), want, rel_tol=1e-12)


@pytest.mark.parametrize("name,params,pts", [
    ("ou", {}, [(0.0, [1.0]), (0.5, [-2.0]), (1.0, [0.3])]),
    ("example-6-2", {"delta": 0.5}, [(0.0, [1.0]), (0.5, [0.4]), (1.0, [2.5])]),
])
def test_gradient_type_decomposition(name, params, pts):
    """Gradient-type models satisfy drift == -a grad(phi) + correction."""
    model = build_model(name, params)
    coeffs = model.coefficients
    assert coeffs.provenance == "gradient-type"
    pot = coeffs.potential
    for t, x in pts:
        x = np.asarray(x, dtype=np.float64)
        want = build_gradient_drift(pot, coeffs.diffusion, (t, x),
                                    fd_step=1e-6)
        got = coeffs.drift_at(t, x)
        if coeffs.extra_drift is not None:
            got = got - coeffs.extra_drift(t, x)
        np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-9)


def test_localize_is_identity_inside_qn():
    """On Q^n the localized drift and diffusion equal the originals exactly."""
    model = build_model("example-6-1-1")
    coeffs, domain = model.coefficients, model.domain
    loc = localize(coeffs, domain, 2)
    for x in (0.6, 1.0, 1.9):
        xa = np.array([x])
        assert np.array_equal(loc.drift_at(0.5, xa), coeffs.drift_at(0.5, xa))
        assert np.array_equal(loc.sigma_at(0.5, xa), coeffs.sigma_at(0.5, xa))


def test_localize_vanishes_far_outside():
    """Outside Q^{n+1} the drift is zero and the diffusion elliptic constant."""
    model = build_model("example-6-1-1")
    loc = localize(model.coefficients, model.domain, 2)
    xa = np.array([50.0])  # far outside Q^3
    np.testing.assert_array_equal(loc.drift_at(0.5, xa), [0.0])
    sig = loc.sigma_at(0.5, xa)
    assert sig.shape == (1, 1)
    assert sig[0, 0] >= 1.0  # 1 + sup estimate, uniformly elliptic


def test_localize_rejects_level_zero():
    model = build_model("example-6-1-1")
    with pytest.raises(PreconditionError):
        localize(model.coefficients, model.domain, 0)


def test_ellipticity_bounds_frozen_oracle():
    """sigma = 1/(1+x^2) on Q^2 = (0,2)x(1/2,2): eigenvalue range
    [(1/5)^2, (4/5)^2] = [0.04, 0.64], attained at the region boundary."""
    model = build_model("example-6-1-1")
    region = model.domain.exhaustion_level(2)
    lo, hi = ellipticity_bounds(model.coefficients.diffusion, region, 33)
    assert math.isclose(lo, 0.04, rel_tol=1e-12)
    assert math.isclose(hi, 0.64, rel_tol=1e-12)


def test_coefficient_set_spot_values():
    """Registry drift values: OU at 2 -> -2, Bessel at 0.5 -> -2, BM -> 0."""
    assert float(build_model("ou").coefficients.drift_at(0.0, np.array([2.0]))[0]) == -2.0
    assert float(build_model("bessel-drift").coefficients.drift_at(
        0.0, np.array([0.5]))[0]) == -2.0
    assert float(build_model("bm").coefficients.drift_at(
        0.0, np.array([17.0]))[0]) == 0.0


def test_potential_field_validates_epsilon_range():
    with pytest.raises(Exception):
        PotentialField(
            dim=1,
            phi=lambda t, x: 0.0,
            grad_phi=lambda t, x: np.zeros(1),
            dt_phi=lambda t, x: 0.0,
            h=None,
            epsilon=2.0,  # must lie in [0, 2)
            K1=0.0,
            label="bad",
        )


def test_diffusion_field_a_is_sigma_sigma_t():
    def sigma(t, x):
        return np.array([[2.0, 1.0], [0.0, 3.0]])

    diff = DiffusionField(dim=2, sigma=sigma, label="triangular")
    a = diff.a(0.0, np.zeros(2))
    np.testing.assert_allclose(a, [[5.0, 3.0], [3.0, 9.0]], rtol=1e-15)
