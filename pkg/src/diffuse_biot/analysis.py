"""Weighted error norms, convergence rates and the discrete energy audit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stokes_biot import Discretization, ProblemData, State

ERROR_NAMES = ("e_u", "e_p", "e_dteta", "e_eta")


class ZeroReferenceError(ValueError):
    """The exact field has zero weighted norm, so a relative error is undefined."""


@dataclass(frozen=True)
class ErrorReport:
    e_u: float
    e_p: float
    e_dteta: float
    e_eta: float

    def __post_init__(self):
        for name in ERROR_NAMES:
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    def as_tuple(self):
        return tuple(getattr(self, n) for n in ERROR_NAMES)


def _sym(grad):
    return 0.5 * (grad + np.swapaxes(grad, -1, -2))


def _ratio(num, den, name):
    if den <= 0.0:
        raise ZeroReferenceError(f"reference field for {name} has zero norm")
    return math.sqrt(num / den)


def weighted_error_norms(state: State, exact, disc: Discretization, t: float | None = None) -> ErrorReport:
    """Relative errors of ``state`` against ``exact`` at time ``t`` (default ``state.t``).

    ``u`` is measured in L2 weighted by ``phi_F``; ``p`` and the structure
    velocity in L2 weighted by ``phi_B``; the displacement in the weighted
    energy norm ``2 mu_B |D|^2 + lambda_B |div|^2``. Exact fields are evaluated
    at the quadrature points.
    """
    t = state.t if t is None else t
    prm = disc.params

    def energy(g):
        D = _sym(g)
        div = np.trace(g, axis1=-2, axis2=-1)
        return 2.0 * prm.mu_B * np.sum(D**2, axis=(-2, -1)) + prm.lambda_B * div**2

    acc = np.zeros(8)
    for part in disc.parts:
        geo = part.geo
        pts = geo.points
        wF = part.phi_F * geo.dx
        wB = part.phi_B * geo.dx
        u_h = disc.V.eval_at_quadrature(state.u, geo)
        u_ex = exact.u(t, pts)
        p_h = disc.X.eval_at_quadrature(state.p, geo)
        p_ex = exact.p(t, pts)
        xi_h = disc.W.eval_at_quadrature(state.xi, geo)
        xi_ex = exact.xi(t, pts)
        _, g_h = disc.W.eval_at_quadrature(state.eta, geo, gradient=True)
        g_ex = exact.grad_eta(t, pts)
        acc += [
            np.sum(wF * np.sum((u_h - u_ex) ** 2, axis=-1)),
            np.sum(wF * np.sum(u_ex**2, axis=-1)),
            np.sum(wB * (p_h - p_ex) ** 2),
            np.sum(wB * p_ex**2),
            np.sum(wB * np.sum((xi_h - xi_ex) ** 2, axis=-1)),
            np.sum(wB * np.sum(xi_ex**2, axis=-1)),
            np.sum(wB * energy(g_h - g_ex)),
            np.sum(wB * energy(g_ex)),
        ]
    num_u, den_u, num_p, den_p, num_x, den_x, num_e, den_e = acc
    return ErrorReport(
        _ratio(num_u, den_u, "u"),
        _ratio(num_p, den_p, "p"),
        _ratio(num_x, den_x, "dteta"),
        _ratio(num_e, den_e, "eta"),
    )


@dataclass
class ConvergenceRow:
    h: float
    dt: float
    epsilon: float
    delta: float
    errors: ErrorReport
    rates: dict = field(default_factory=dict)


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def append(self, row: ConvergenceRow):
        self.rows.append(row)

    def column(self, name):
        return [getattr(r.errors, name) for r in self.rows]

    def rate(self, name, level=-1):
        return self.rows[level].rates.get(name)


def convergence_rates(table: ConvergenceTable) -> ConvergenceTable:
    """Fill ``rate = log2(e_prev / e)`` for every row after the first."""
    rows = table.rows
    if len(rows) < 2:
        raise ValueError("need at least two rows to compute rates")
    for prev, row in zip(rows[:-1], rows[1:]):
        if not math.isclose(prev.h / row.h, 2.0, rel_tol=1e-9):
            raise ValueError(f"h must halve between rows, got {prev.h} -> {row.h}")
    rows[0].rates = {}
    for prev, row in zip(rows[:-1], rows[1:]):
        rates = {}
        for name in ERROR_NAMES:
            a, b = getattr(prev.errors, name), getattr(row.errors, name)
            if a <= 0 or b <= 0:
                raise ZeroDivisionError(f"zero {name} error at h={row.h if b <= 0 else prev.h}")
            rates[name] = math.log2(a / b)
        row.rates = rates
    return table


@dataclass(frozen=True)
class EnergyBalance:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs), 1.0)


def _quad(A, x):
    return float(x @ (A @ x))


def energy_balance(disc: Discretization, data: ProblemData, old: State, new: State) -> EnergyBalance:
    """Both sides of the one-step energy identity for a backward Euler step.

    Multiplying the step equations by ``dt`` times the new solution gives::

        1/2 [rho_F (|u1|^2 - |u0|^2 + |u1 - u0|^2) + rho_B (same for xi)
             + c0 (same for p) + |eta1|_E^2 - |eta0|_E^2 + |eta1 - eta0|_E^2]
        + dt [a_F(u1, u1) + BJS(u1 - xi1) + kappa |grad p1|^2 + s(pi1, pi1)]
        = dt F(t1; u1, pi1, xi1, p1)

    with all norms weighted by the phase fields.
    """
    prm = disc.params
    dt = new.t - old.t
    if dt <= 0:
        raise ValueError("states must be consecutive in time")

    def kinetic(M, a, b):
        return _quad(M, b) - _quad(M, a) + _quad(M, b - a)

    lhs = 0.5 * (
        prm.rho_F * kinetic(disc.M_u, old.u, new.u)
        + prm.rho_B * kinetic(disc.M_xi, old.xi, new.xi)
        + prm.c0 * kinetic(disc.M_p, old.p, new.p)
        + kinetic(disc.E, old.eta, new.eta)
    )
    slip = new.u - new.xi
    lhs += dt * (
        _quad(disc.K_u, new.u) + _quad(disc.T, slip) + _quad(disc.K_p, new.p) + _quad(disc.S, new.pressure)
    )
    f = disc.forcing_vector(new.t, data)
    x = np.concatenate([new.u, new.pressure, new.xi, new.p])
    return EnergyBalance(lhs, dt * float(f @ x))


def energy_audit(trajectory, disc: Discretization, data: ProblemData, tol: float = 1e-12) -> np.ndarray:
    """Relative residual of the energy identity for every step of ``trajectory``.

    Requires a backward Euler trajectory with homogeneous Dirichlet data
    (checked against ``tol``); the identity is then exact up to solver error.
    """
    if disc.scheme.time_scheme != "backward_euler":
        raise ValueError("the energy identity holds for backward Euler steps")
    (du, dx, dp), _ = disc.dirichlet_dofs(data)
    out = []
    for old, new in zip(trajectory[:-1], trajectory[1:]):
        bdry = np.concatenate([new.u[du], new.xi[dx], new.eta[dx], new.p[dp]])
        if len(bdry) and np.max(np.abs(bdry)) > tol:
            raise ValueError("energy audit requires homogeneous Dirichlet data")
        out.append(energy_balance(disc, data, old, new).residual)
    return np.asarray(out)
