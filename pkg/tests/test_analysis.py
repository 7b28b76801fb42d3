import math

import numpy as np
import pytest

from diffuse_biot.analysis import (
    ConvergenceRow,
    ConvergenceTable,
    EnergyBalance,
    ErrorReport,
    ZeroReferenceError,
    convergence_rates,
    energy_audit,
    weighted_error_norms,
)
from diffuse_biot.mesh import Rect, build_structured_mesh
from diffuse_biot.mms import ExactSolution, ForcingOnlyData, ManufacturedData
from diffuse_biot.phasefield import InterfaceGeometry, PhaseField, WeightFamily
from diffuse_biot.stokes_biot import (
    Discretization,
    PhysicalParams,
    SchemeConfig,
    SimulationConfig,
    State,
    run_simulation,
)


class PolynomialExact:
    """Quadratic velocities/displacements and a linear Biot pressure."""

    def __init__(self, scale=1.0):
        self.s = scale

    def u(self, t, x):
        return self.s * np.stack([x[..., 0] ** 2 + 1, x[..., 0] * x[..., 1]], axis=-1)

    def xi(self, t, x):
        return self.s * np.stack([x[..., 1] + 2, x[..., 0] - x[..., 1] ** 2], axis=-1)

    def eta(self, t, x):
        return self.s * np.stack([x[..., 0] * x[..., 1], x[..., 1] ** 2 + x[..., 0]], axis=-1)

    def grad_eta(self, t, x):
        g = np.zeros(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = x[..., 1]
        g[..., 0, 1] = x[..., 0]
        g[..., 1, 0] = 1.0
        g[..., 1, 1] = 2 * x[..., 1]
        return self.s * g

    def p(self, t, x):
        return self.s * (1 + x[..., 0] - 2 * x[..., 1])


@pytest.fixture(scope="module")
def disc():
    mesh = build_structured_mesh(4, 8, Rect(0, 1, -1, 1))
    pf = PhaseField(InterfaceGeometry(), WeightFamily("tanh"), 0.25, 1e-3)
    return Discretization(mesh, PhysicalParams(mu_B=2.0, lambda_B=3.0),
                          SchemeConfig("backward_euler", "weighted", "P2P1", 0.1, 0.1), pf)


def interpolated_state(disc, exact, t=0.0):
    return State(0, t, disc.V.interpolate(lambda x: exact.u(t, x)), np.zeros(disc.Q.dim),
                 disc.W.interpolate(lambda x: exact.xi(t, x)), disc.W.interpolate(lambda x: exact.eta(t, x)),
                 disc.X.interpolate(lambda x: exact.p(t, x)))


def test_interpolant_of_representable_fields_has_zero_error(disc):
    exact = PolynomialExact()
    rep = weighted_error_norms(interpolated_state(disc, exact), exact, disc)
    assert max(rep.as_tuple()) < 1e-12


def test_scaled_state_gives_exact_relative_error(disc):
    exact = PolynomialExact()
    state = interpolated_state(disc, PolynomialExact(1.25))
    rep = weighted_error_norms(state, exact, disc)
    assert np.allclose(rep.as_tuple(), 0.25, rtol=1e-10)


def test_zero_reference_raises(disc):
    exact = PolynomialExact(0.0)
    with pytest.raises(ZeroReferenceError):
        weighted_error_norms(interpolated_state(disc, PolynomialExact()), exact, disc)


def test_manufactured_errors_are_small_but_nonzero(disc):
    ex = ExactSolution(disc.params)
    rep = weighted_error_norms(interpolated_state(disc, ex, t=0.3), ex, disc)
    assert all(0 < e < 5e-2 for e in rep.as_tuple())


def test_error_report_validation():
    with pytest.raises(ValueError):
        ErrorReport(0.1, -1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        ErrorReport(0.1, float("nan"), 0.1, 0.1)


def _table(errors, h0=0.2):
    t = ConvergenceTable()
    for i, e in enumerate(errors):
        h = h0 / 2**i
        t.append(ConvergenceRow(h, h / 2, h, 1e-3 / 2**i, ErrorReport(*e)))
    return t


def test_rates_of_a_power_law():
    errs = [(3 * h, 2 * h**2, h**0.5, 5 * h**1.5) for h in (0.2, 0.1, 0.05)]
    t = convergence_rates(_table(errs))
    assert t.rows[0].rates == {}
    for row in t.rows[1:]:
        assert row.rates["e_u"] == pytest.approx(1.0)
        assert row.rates["e_p"] == pytest.approx(2.0)
        assert row.rates["e_dteta"] == pytest.approx(0.5)
        assert row.rates["e_eta"] == pytest.approx(1.5)
    assert t.rate("e_p") == pytest.approx(2.0)
    assert t.column("e_u") == [e[0] for e in errs]


def test_rate_errors():
    with pytest.raises(ValueError):
        convergence_rates(_table([(1, 1, 1, 1)]))
    with pytest.raises(ZeroDivisionError):
        convergence_rates(_table([(1, 1, 1, 1), (0.5, 0.0, 0.5, 0.5)]))
    t = _table([(1, 1, 1, 1), (0.5, 0.5, 0.5, 0.5)])
    t.rows[1].h = 0.07
    with pytest.raises(ValueError):
        convergence_rates(t)


def test_energy_balance_residual_is_relative():
    assert EnergyBalance(2.0, 2.0).residual == 0.0
    assert EnergyBalance(100.0, 101.0).residual == pytest.approx(1 / 101)
    assert EnergyBalance(1e-20, 0.0).residual == pytest.approx(1e-20)


def test_energy_audit_guards():
    mesh = build_structured_mesh(3, 6, Rect(0, 1, -1, 1))
    pf = PhaseField(InterfaceGeometry(), WeightFamily("tanh"), 1 / 3)
    params = PhysicalParams()
    ex = ExactSolution(params)
    sc = SchemeConfig("backward_euler", "theta", "P2P1", 0.1, 0.2)
    res = run_simulation(SimulationConfig(mesh, params, sc, pf, ForcingOnlyData(ex)), keep_trajectory=True)
    r = energy_audit(res.trajectory, res.discretization, ForcingOnlyData(ex))
    assert len(r) == 2 and np.all(r < 1e-10)
    # inhomogeneous boundary data is rejected
    data = ManufacturedData(ex)
    res = run_simulation(SimulationConfig(mesh, params, sc, pf, data), keep_trajectory=True)
    with pytest.raises(ValueError):
        energy_audit(res.trajectory, res.discretization, data)
    mp = Discretization(mesh, params, SchemeConfig("midpoint", "theta", "P2P1", 0.1, 0.2), pf)
    with pytest.raises(ValueError):
        energy_audit(res.trajectory, mp, data)


def test_rates_match_log2():
    t = convergence_rates(_table([(0.3, 0.3, 0.3, 0.3), (0.1, 0.2, 0.25, 0.3)]))
    assert t.rate("e_u") == pytest.approx(math.log2(3))
    assert t.rate("e_eta") == pytest.approx(0.0)
