import json

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given

from hydroelastic.bifurcation import lambda_star
from hydroelastic.continuation import trace_primary
from hydroelastic.elasticity import quadratic_model
from hydroelastic.flowfield import (
    DegenerateMapError,
    HarmonicExtension,
    bernoulli_residual,
    critical_layers,
    export_field,
    harmonic_extension,
    laminar_critical_depth,
    reconstruct,
    vertical_factors,
)
from hydroelastic.residual import SurfaceState, to_physical
from hydroelastic.spectral import PeriodicField, StripGeometry, dirichlet_neumann


@pytest.fixture(scope="module")
def wave():
    model, geom = quadratic_model(1.0, 1.0), StripGeometry(1.0, 1.0, 16)
    br = trace_primary(1, "+", 0.8, model, geom, n_steps=20)
    return model, geom, br.points[-1].state


def test_vertical_factors_match_hyperbolic_ratios():
    k = np.arange(1, 6)
    y = np.linspace(-0.7, 0.0, 5)
    S, C = vertical_factors(k, y, 0.7)
    kk, yy = np.meshgrid(k, y)
    assert np.allclose(S, np.sinh(kk * (yy + 0.7)) / np.sinh(kk * 0.7), rtol=1e-13)
    assert np.allclose(C, np.cosh(kk * (yy + 0.7)) / np.sinh(kk * 0.7), rtol=1e-13)


def test_vertical_factors_do_not_overflow():
    S, C = vertical_factors(np.array([400.0]), np.array([-5.0, 0.0]), 5.0)
    assert np.all(np.isfinite(S)) and S[-1, 0] == 1.0 and S[0, 0] == 0.0


def test_constant_extends_linearly():
    y = np.linspace(-2.0, 0.0, 7)
    V = harmonic_extension(PeriodicField.constant(2.0, 4), 2.0, y=y)
    assert np.allclose(V, (y + 2.0)[:, None], atol=1e-15)


@pytest.mark.parametrize("k", [1, 3])
def test_extension_is_discretely_harmonic(k):
    h = 1.0
    ext = HarmonicExtension(PeriodicField.mode(k, 6), h)
    n = 401
    x = np.linspace(0, 2 * np.pi, n)
    y = np.linspace(-h, 0, n)
    V = ext.on_grid(x, y)
    dx, dy = x[1] - x[0], y[1] - y[0]
    lap = ((V[1:-1, 2:] - 2 * V[1:-1, 1:-1] + V[1:-1, :-2]) / dx ** 2
           + (V[2:, 1:-1] - 2 * V[1:-1, 1:-1] + V[:-2, 1:-1]) / dy ** 2)
    # five-point stencil truncation error is O(k^4 dx^2)
    assert np.max(np.abs(lap)) <= 1e-8 + 0.2 * k ** 4 * dx ** 2
    assert np.allclose(V[-1], np.cos(k * x), atol=1e-14) and np.allclose(V[0], 0.0, atol=1e-14)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=6), st.floats(0.3, 3.0))
def test_normal_derivative_is_dirichlet_neumann(c, h):
    f = PeriodicField.cosine([0.4] + c)
    ext = HarmonicExtension(f, h)
    x = np.linspace(0, 2 * np.pi, 17)
    assert np.allclose(ext.dy(x, np.zeros_like(x)), dirichlet_neumann(f, h).evaluate(x), atol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_laminar_stream_function(lam, gamma):
    model, geom = quadratic_model(1.0, 1.0), StripGeometry(1.3, 1.0, 8)
    s = SurfaceState.trivial(lam, gamma, 8)
    f = reconstruct(s, model, geom, n_y=17)
    m, _ = to_physical(s, geom)
    Y = f.V
    exact = gamma * Y ** 2 / 2 + (m / geom.h - gamma * geom.h / 2) * Y - m
    assert np.max(np.abs(f.psi - exact)) <= 1e-12 * (1 + abs(m) + abs(gamma))
    assert np.allclose(f.psi_Y, gamma * (Y - geom.h) + lam, atol=1e-12 * (1 + abs(lam) + abs(gamma)))
    assert np.max(np.abs(f.psi_X)) <= 1e-12 * (1 + abs(lam) + abs(gamma))


def test_wave_field_invariants(wave):
    model, geom, s = wave
    f = reconstruct(s, model, geom)
    m, _ = to_physical(s, geom)
    assert np.max(np.abs(f.psi[-1])) <= 1e-8
    assert np.max(np.abs(f.psi[0] + m)) <= 1e-10
    assert np.all(f.V[0] == 0.0)
    assert np.allclose(f.V[-1], s.w.evaluate(f.x) + geom.h, atol=0)
    assert np.all(f.jacobian_det > 0)
    # Cauchy-Riemann by independent central differences
    X, Y = np.meshgrid(f.x, f.y[1:-1])
    e = 1e-5
    U = lambda x, y: f.model.map(x, y)[0]
    V = lambda x, y: f.model.map(x, y)[1]
    Ux = (U(X + e, Y) - U(X - e, Y)) / (2 * e)
    Vy = (V(X, Y + e) - V(X, Y - e)) / (2 * e)
    Uy = (U(X, Y + e) - U(X, Y - e)) / (2 * e)
    Vx = (V(X + e, Y) - V(X - e, Y)) / (2 * e)
    assert np.max(np.abs(Ux - Vy)) <= 1e-8 and np.max(np.abs(Uy + Vx)) <= 1e-8


def test_bernoulli_balance_on_wave(wave):
    model, geom, s = wave
    assert np.max(np.abs(bernoulli_residual(s, model, geom))) <= 1e-6


def test_degenerate_map_raises():
    model, geom = quadratic_model(1.0, 1.0), StripGeometry(1.0, 1.0, 8)
    s = SurfaceState(0.0, PeriodicField.mode(1, 8, amplitude=np.tanh(1.0)), 1.0, 0.0)
    with pytest.raises(DegenerateMapError):
        reconstruct(s, model, geom, check_residual=False)


def test_critical_layer_of_laminar_flow():
    model, geom = quadratic_model(1.0, 1.0), StripGeometry(1.0, 1.0, 8)
    f = reconstruct(SurfaceState.trivial(-1.0, -2.0, 8), model, geom, n_y=33)
    rep = critical_layers(f)
    assert rep.laminar_critical_depth == pytest.approx(0.5)
    assert len(rep.critical_points) == len(f.x)
    assert all(abs(p.Y - 0.5) <= 1e-12 for p in rep.critical_points)
    assert rep.stagnation_points == []


def test_no_critical_layer_without_vorticity(model):
    geom = StripGeometry(1.0, 1.0, 8)
    lam = float(lambda_star(1, "-", 0.0, model, geom))
    rep = critical_layers(reconstruct(SurfaceState.trivial(lam, 0.0, 8), model, geom, n_y=17))
    assert rep.critical_points == [] and rep.laminar_critical_depth is None


def test_critical_depth_outside_layer():
    assert laminar_critical_depth(3.0, 1.0, 1.0) is None
    assert laminar_critical_depth(-1.0, 1.0, 1.0) is None
    assert laminar_critical_depth(0.5, 1.0, 1.0) == 0.5


def test_stagnation_point_in_wave_with_critical_layer():
    model, geom = quadratic_model(1.0, 1.0), StripGeometry(1.0, 1.0, 12)
    gamma = -2.0
    br = trace_primary(1, "-", gamma, model, geom, n_steps=30)
    s = br.points[-1].state
    f = reconstruct(s, model, geom, n_y=65)
    rep = critical_layers(f, s)
    for p in rep.stagnation_points:
        u, v, _ = f.model.velocity(np.array([p.x]), np.array([p.y]))
        assert abs(u[0]) + abs(v[0]) <= 1e-8
    assert rep.critical_points and rep.stagnation_points
    # the flow is symmetric about the crest, so the set is too
    for p in rep.stagnation_points:
        gaps = [abs(np.angle(np.exp(1j * (p.x + q.x)))) + abs(p.y - q.y) for q in rep.stagnation_points]
        assert min(gaps) <= 1e-6


def test_field_export(tmp_path):
    model, geom = quadratic_model(1.0, 1.0), StripGeometry(1.0, 1.0, 4)
    f = reconstruct(SurfaceState.trivial(1.0, 1.0, 4), model, geom, n_y=3)
    paths = export_field(f, tmp_path, quantities=["psi"], metadata={"note": "x"})
    lines = open(paths[0]).read().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 1 + 3 * geom.M
    # y is the outer index
    assert lines[1].split(",")[1] == lines[2].split(",")[1]
    assert json.load(open(paths[1]))["note"] == "x"
