import warnings

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given

from hydroelastic.bifurcation import (
    DegenerateConfigurationWarning,
    KernelInconsistencyError,
    T,
    b8a_matrix,
    classify_kernel,
    gamma_star_squared,
    lambda_star,
    nondegeneracy_determinants,
    pairing,
    period_integral,
    resonant_gamma,
    second_derivative_field,
    second_derivative_pairing,
    sign_label,
    transversality,
)
from hydroelastic.elasticity import quadratic_model
from hydroelastic.residual import dispersion
from hydroelastic.spectral import PeriodicField, StripGeometry

gammas = st.floats(-6.0, 6.0)
depths = st.floats(0.2, 4.0)
modes = st.integers(1, 24)


def test_flat_threshold_closed_form(model, geom):
    lam = lambda_star(1, "+", 0.0, model, geom)
    assert lam == pytest.approx(np.sqrt(1.5 * np.tanh(1.0)), rel=1e-15)
    assert lambda_star(1, "-", 0.0, model, geom) == -lam


@given(modes, gammas, depths, st.sampled_from("+-"))
def test_thresholds_are_roots(n, gamma, h, s):
    geom = StripGeometry(h, 1.0, 4)
    model = quadratic_model(1.0, 1.0)
    lam = lambda_star(n, s, gamma, model, geom)
    scale = 2 * n * lam ** 2 / np.tanh(n * h) + abs(2 * lam * gamma) + 2 + n ** 4
    assert abs(dispersion(n, lam, gamma, model, geom)) <= 1e-13 * scale
    assert np.sign(lam) == (1 if s == "+" else -1)


@given(st.integers(1, 30), depths)
def test_T_is_decreasing(n, h):
    assert T(n + 1, h) < T(n, h)


def test_resonant_vorticity_at_unit_parameters(model, geom):
    g2 = gamma_star_squared(1, 2, model, geom)
    assert g2 == pytest.approx(13.2675, abs=5e-5)
    gs = resonant_gamma(1, 2, "+", model, geom)
    assert gs > 0
    assert lambda_star(1, "+", gs, model, geom) == pytest.approx(lambda_star(2, "+", gs, model, geom), abs=1e-12)
    with pytest.raises(ValueError):
        gamma_star_squared(2, 2, model, geom)


@given(st.integers(1, 6), st.integers(1, 6), depths)
def test_resonant_vorticity_positive(n, d, h):
    geom = StripGeometry(h, 1.0, 4)
    assert gamma_star_squared(n, n + d, quadratic_model(1.0, 1.0), geom) > 0


def test_kernel_classification(model, geom):
    assert classify_kernel(0.1, 0.0, model, geom, 16).kind == "invertible"
    lam = float(lambda_star(3, "-", 0.7, model, geom))
    k = classify_kernel(lam, 0.7, model, geom, 16)
    assert (k.kind, k.modes, k.sign) == ("simple", (3,), "-")
    gs = resonant_gamma(1, 2, "+", model, geom)
    k2 = classify_kernel(float(lambda_star(1, "+", gs, model, geom)), gs, model, geom, 16)
    assert str(k2) == "double(1,2,+)"


def test_kernel_with_three_roots_is_an_error(model, geom):
    with pytest.raises(KernelInconsistencyError):
        classify_kernel(1.0, 0.0, model, geom, 16, tol=1e3)


@given(modes, gammas, st.sampled_from("+-"))
def test_transversality_matches_lambda_derivative(n, gamma, s):
    geom = StripGeometry(1.0, 1.0, 4)
    model = quadratic_model(1.0, 1.0)
    lam = lambda_star(n, s, gamma, model, geom)
    e = 1e-6 * max(1.0, abs(lam))
    dD = (dispersion(n, lam + e, gamma, model, geom) - dispersion(n, lam - e, gamma, model, geom)) / (2 * e)
    assert transversality(n, s, gamma, model, geom) == pytest.approx(dD / 2, rel=1e-6)
    assert transversality(n, s, gamma, model, geom) != 0.0


def test_sign_labels():
    assert sign_label(1) == "+" and sign_label("-") == "-"
    with pytest.raises(ValueError):
        sign_label("0")


@pytest.mark.parametrize("n", [1, 2, 3])
def test_period_integrals(n):
    assert abs(period_integral(lambda x: np.cos(n * x) ** 3)) <= 1e-12
    assert abs(period_integral(lambda x: np.sin(n * x) ** 2 * np.cos(n * x))) <= 1e-12
    assert period_integral(lambda x: np.cos(n * x) ** 2) == pytest.approx(np.pi, rel=1e-14)


def test_first_determinant_matches_matrix(model, geom):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateConfigurationWarning)
        rep = nondegeneracy_determinants(1, "+", model, geom)
    assert rep.det_b8a == pytest.approx(np.linalg.det(b8a_matrix(1, "+", model, geom)), rel=1e-12)
    assert rep.det_b8a != 0.0


def test_second_determinant_is_flagged_degenerate(model, geom):
    with pytest.warns(DegenerateConfigurationWarning):
        rep = nondegeneracy_determinants(1, "+", model, geom)
    assert abs(rep.triple_integral) <= 1e-12


def test_pairing():
    f = PeriodicField.cosine([2.0, 0.5, 0.25])
    assert pairing(f, 0) == pytest.approx(4 * np.pi)
    assert pairing(f, 2) == pytest.approx(0.25 * np.pi)


def test_second_derivative_symmetric_and_bilinear(model, geom):
    lam, gamma = 1.2, 0.4
    y1 = PeriodicField.cosine([0, 1.0, 0.3] + [0] * 14)
    y2 = PeriodicField.cosine([0, 0.0, 1.0, -0.2] + [0] * 13)
    a = second_derivative_field(y1, y2, lam, gamma, model, geom)
    b = second_derivative_field(y2, y1, lam, gamma, model, geom)
    scale = np.max(np.abs(a.a))
    assert np.max(np.abs(a.a - b.a)) <= 1e-6 * scale
    c = second_derivative_field(y1, 3.0 * y2, lam, gamma, model, geom)
    assert np.max(np.abs(c.a - 3.0 * a.a)) <= 1e-6 * 3 * scale


def test_second_derivative_predicts_quadratic_remainder(model, geom):
    from hydroelastic.residual import SurfaceState, evaluate_F, linearized_trivial

    lam, gamma = 1.1, -0.3
    y = PeriodicField.mode(1, geom.N)
    Fww = second_derivative_field(y, y, lam, gamma, model, geom)
    eps = 1e-4
    F = evaluate_F(SurfaceState(0.0, eps * y, lam, gamma), model, geom)
    rem = F.a - eps * linearized_trivial(lam, gamma, model, geom, y, 0.0).a
    assert np.allclose(rem, 0.5 * eps ** 2 * Fww.a, atol=1e-3 * eps ** 2 * np.max(np.abs(Fww.a)))
    assert second_derivative_pairing(y, y, 2, lam, gamma, model, geom) == pytest.approx(np.pi * Fww.a[2], rel=1e-6)


def test_second_derivative_rejects_odd_direction(model, geom):
    with pytest.raises(ValueError):
        second_derivative_field(PeriodicField.mode(1, geom.N, kind="sin"), PeriodicField.mode(1, geom.N),
                                1.0, 0.0, model, geom)
