import numpy as np
import pytest

from diffuse_biot import PhysicalParams
from diffuse_biot.mms import ExactSolution, ForcingOnlyData, ManufacturedData
from oracles import jacobian, max_residuals, stress

PARAM_SETS = [
    PhysicalParams(),
    PhysicalParams(rho_F=2.0, rho_B=0.5, mu_F=0.3, mu_B=4.0, lambda_B=7.0, alpha=0.6,
                   c0=0.01, kappa=0.2, alpha_BJ=3.0),
]


@pytest.mark.parametrize("params", PARAM_SETS)
def test_forcing_satisfies_defining_identities(params):
    worst = max_residuals(ExactSolution(params), n_points=100, seed=3)
    assert max(worst.values()) <= 1e-6, worst


def test_oracle_detects_a_wrong_forcing():
    class Broken(ExactSolution):
        def forcing_fields(self, t, x):
            F_F, F_B, g, h = super().forcing_fields(t, x)
            return F_F, F_B, g * 1.001, h

    worst = max_residuals(Broken(), n_points=20, seed=1)
    assert worst["mass"] > 1e-4
    assert worst["fluid"] <= 1e-6


def test_structure_velocity_is_time_derivative():
    ex = ExactSolution()
    x = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    h = 1e-5
    for t in (0.1, 0.45, 0.8):
        fd = (ex.eta(t + h, x) - ex.eta(t - h, x)) / (2 * h)
        assert np.allclose(ex.xi(t, x), fd, atol=1e-8)


def test_fields_at_known_points():
    ex = ExactSolution()
    x = np.array([[0.5, 0.0], [0.0, 1.0]])
    # a = (-3x + cos y, y + 1)
    assert np.allclose(ex.u(0.0, x), np.pi * np.array([[-0.5, 1.0], [np.cos(1.0), 2.0]]))
    assert np.allclose(ex.p(0.0, x), [1.0, 0.0])
    assert np.allclose(ex.pi(0.0, x), [1.0 + 2 * np.pi, 2 * np.pi])
    assert np.allclose(ex.eta(0.0, x), 0.0)
    assert np.allclose(ex.h_div(0.0, x), -2 * np.pi)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_traction_matches_stress_of_the_fields(params):
    ex = ExactSolution(params)
    rng = np.random.default_rng(2)
    for _ in range(10):
        t = rng.uniform(0, 1)
        x = np.array([rng.uniform(0, 1), rng.uniform(-1, 1)])
        n = rng.normal(size=2)
        n /= np.linalg.norm(n)
        grad = jacobian(lambda y: ex.u(t, y[None])[0], x)
        sigma = stress(grad, 2 * params.mu_F, 0.0) - ex.pi(t, x[None])[0] * np.eye(2)
        assert np.allclose(ex.traction(t, x[None], n)[0], sigma @ n, atol=1e-8)


def test_manufactured_data_layout_and_values():
    ex = ExactSolution()
    data = ManufacturedData(ex)
    assert set(data.u_dirichlet) | set(data.u_traction) == {"bottom", "right", "top", "left"}
    assert not set(data.u_dirichlet) & set(data.u_traction)
    x = np.array([[0.3, 1.0]])
    assert np.allclose(data.u_value(0.2, x), ex.u(0.2, x))
    assert np.allclose(data.xi_value(0.2, x), ex.xi(0.2, x))
    u0, pi0, xi0, eta0, p0 = data.initial(x)
    assert np.allclose(xi0, ex.xi(0.0, x)) and np.allclose(eta0, 0.0)


def test_forcing_only_data_is_homogeneous():
    ex = ExactSolution()
    data = ForcingOnlyData(ex, scale=2.0)
    x = np.random.default_rng(0).uniform(0, 1, (5, 2))
    F_F, F_B, g, h = data.forcing(0.3, x)
    F_F0, F_B0, g0, _ = ex.forcing_fields(0.3, x)
    assert np.allclose(F_F, 2 * F_F0) and np.allclose(g, 2 * g0)
    assert np.all(h == 0)
    assert np.allclose(ForcingOnlyData(ex, with_divergence=True).forcing(0.3, x)[3], ex.h_div(0.3, x))
    for fn in (data.u_value, data.eta_value, data.xi_value, data.p_value):
        assert np.all(fn(0.3, x) == 0)
    assert all(np.all(v == 0) for v in data.initial(x))
    assert np.all(data.traction(0.3, x, np.array([0.0, 1.0]), "top") == 0)
