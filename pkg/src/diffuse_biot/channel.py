"""Pressure-driven flow through a fluid channel embedded in a poroelastic block."""

from __future__ import annotations

import numpy as np

from .stokes_biot import Discretization, ProblemData, State


class ChannelData(ProblemData):
    """Boundary data of the channel demo.

    Traction ``-g n`` on the inflow (left) end and zero traction on the
    outflow (right) end drive the fluid; the displacement is clamped on both
    ends, where the Biot pressure flux is zero. Top and bottom carry ``p = 0``
    and are traction free for the fluid.
    """

    u_traction = ("left", "right")
    eta_dirichlet = ("left", "right")
    p_dirichlet = ("bottom", "top")

    def __init__(self, inflow_traction: float = 10.0):
        self.inflow_traction = float(inflow_traction)

    def traction(self, t, x, n, tag):
        x = np.asarray(x, dtype=float)
        if tag == "left":
            return -self.inflow_traction * np.broadcast_to(np.asarray(n, dtype=float), x.shape)
        return np.zeros(x.shape)


class SteadyStateMonitor:
    """Callback for :func:`run_simulation` that stops once ``u`` settles.

    The change is measured in the ``phi_F``-weighted L2 norm relative to the
    norm of the new velocity. ``history`` collects ``(step, t, change)``.
    """

    def __init__(self, tol: float = 1e-6, on_step=None):
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.tol = tol
        self.on_step = on_step
        self.previous = None
        self.history = []
        self.converged = False

    def relative_change(self, disc: Discretization, state: State) -> float:
        du = state.u - self.previous
        den = float(state.u @ (disc.M_u @ state.u))
        num = float(du @ (disc.M_u @ du))
        return np.inf if den == 0.0 else np.sqrt(num / den)

    def __call__(self, disc: Discretization, state: State) -> bool:
        if self.on_step is not None:
            self.on_step(disc, state)
        change = np.inf if self.previous is None else self.relative_change(disc, state)
        self.history.append((state.n, state.t, change))
        self.previous = state.u.copy()
        self.converged = change <= self.tol
        return self.converged


def fluid_speed_max(disc: Discretization, state: State) -> float:
    """Largest nodal speed among nodes where ``phi_F > 1/2``."""
    coords = disc.V.node_coords
    inside = disc.pf.phi(coords)[0] > 0.5
    speed = np.linalg.norm(state.u.reshape(-1, 2), axis=1)
    return float(speed[inside].max()) if inside.any() else 0.0
