import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given

from hydroelastic.residual import (
    SurfaceState,
    dispersion,
    evaluate_F,
    fd_jacobian,
    from_physical,
    jacobian,
    linearized_trivial,
    residual_vector,
    to_physical,
    trivial_jacobian,
)
from hydroelastic.spectral import PeriodicField, StripGeometry

params = st.floats(-5.0, 5.0)


@given(params, params)
def test_flat_state_is_exact_root(lam, gamma):
    geom = StripGeometry(1.0, 1.0, 8)
    from hydroelastic.elasticity import quadratic_model

    F = evaluate_F(SurfaceState.trivial(lam, gamma, 8), quadratic_model(1.0, 1.0), geom)
    assert F.norm() == 0.0


def test_state_validation():
    with pytest.raises(ValueError):
        SurfaceState(0.0, PeriodicField.mode(1, 4, kind="sin"), 1.0, 0.0)
    with pytest.raises(ValueError):
        SurfaceState(0.0, PeriodicField.constant(1e-6, 4), 1.0, 0.0)


def test_vector_round_trip():
    u = np.array([0.3, 0.1, -0.2, 0.05])
    s = SurfaceState.from_vector(u, 1.5, -0.5)
    assert np.array_equal(s.vector(), u)
    assert s.N == 3


def test_dispersion_closed_form(model):
    geom = StripGeometry(1.0, 1.0, 8)
    assert dispersion(1, 0.0, 0.0, model, geom) == pytest.approx(-3.0)
    assert dispersion(2, 1.0, 1.0, model, geom) == pytest.approx(4 / np.tanh(2) - 2 - 18)
    with pytest.raises(ValueError):
        dispersion(0, 1.0, 1.0, model, geom)


def test_linearization_matches_directional_difference(model):
    geom = StripGeometry(0.7, 2.0, 10)
    lam, gamma = 1.3, -0.4
    f = PeriodicField.cosine([0, 0.3, -0.1, 0.2] + [0] * 7)
    lin = linearized_trivial(lam, gamma, model, geom, f, 0.5)
    t = 1e-6
    u = np.concatenate([[0.5], f.a[1:]])
    fd = (residual_vector(t * u, lam, gamma, model, geom) - residual_vector(-t * u, lam, gamma, model, geom)) / (2 * t)
    assert np.allclose(fd, lin.a, atol=1e-7)


def test_fd_jacobian_of_linear_map_is_exact():
    A = np.array([[1.0, 2.0], [3.0, -4.0]])
    assert np.allclose(fd_jacobian(lambda x: A @ x, np.array([0.3, 0.7])), A, atol=1e-9)


def test_jacobian_modes_agree_at_flat_state(model, geom):
    s = SurfaceState.trivial(0.9, 0.3, geom.N)
    fd = jacobian(s, model, geom)
    an = jacobian(s, model, geom, mode="analytic-trivial")
    assert np.allclose(fd, an, rtol=1e-6, atol=1e-6 * np.max(np.abs(an)))
    assert np.array_equal(an, trivial_jacobian(0.9, 0.3, model, geom))
    with pytest.raises(ValueError):
        jacobian(s, model, geom, mode="secant")


@given(params, params, st.floats(-1, 1), st.floats(0.1, 3), st.floats(0.1, 10))
def test_physical_round_trip(lam, gamma, theta, h, g):
    geom = StripGeometry(h, g, 4)
    s = SurfaceState(theta, PeriodicField.zeros(4), lam, gamma)
    m, Q = to_physical(s, geom)
    lam2, theta2 = from_physical(m, Q, gamma, geom)
    assert lam2 == pytest.approx(lam, abs=1e-12)
    assert theta2 == pytest.approx(theta, abs=1e-12 * (1 + lam ** 2 + g * h))


def test_residual_is_quadratic_off_kernel(model, geom):
    from hydroelastic.bifurcation import lambda_star

    lam = float(lambda_star(1, "+", 0.5, model, geom))
    ratios = []
    for eps in (1e-3, 1e-4):
        u = np.zeros(geom.N + 1)
        u[1] = eps
        ratios.append(np.max(np.abs(residual_vector(u, lam, 0.5, model, geom))) / eps ** 2)
    assert ratios[0] == pytest.approx(ratios[1], rel=1e-2)
