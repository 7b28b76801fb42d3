"""Manufactured solution on (0, 1) x (-1, 1) and the data derived from it.

Fields (``c = cos(pi t)``, ``s = sin(pi t)``, ``a(x, y) = (-3x + cos y, y + 1)``)::

    u   = pi c a            pi_F = e^t sin(pi x) cos(pi y / 2) + 2 pi c
    eta = s a               p    = e^t sin(pi x) cos(pi y / 2)
    xi  = d(eta)/dt = pi c a

The forcing terms below were differentiated by hand; ``tests/test_mms.py``
checks them against finite differences of the defining equations.
"""

from __future__ import annotations

import numpy as np

from .stokes_biot import PhysicalParams, ProblemData

PI = np.pi


def _a(x):
    return np.stack([-3.0 * x[..., 0] + np.cos(x[..., 1]), x[..., 1] + 1.0], axis=-1)


def _grad_a(x):
    """``[..., i, j] = d a_i / d x_j``."""
    g = np.zeros(x.shape[:-1] + (2, 2))
    g[..., 0, 0] = -3.0
    g[..., 0, 1] = -np.sin(x[..., 1])
    g[..., 1, 1] = 1.0
    return g


def _bump(x):
    return np.sin(PI * x[..., 0]) * np.cos(0.5 * PI * x[..., 1])


def _grad_bump(x):
    g = np.empty(x.shape[:-1] + (2,))
    g[..., 0] = PI * np.cos(PI * x[..., 0]) * np.cos(0.5 * PI * x[..., 1])
    g[..., 1] = -0.5 * PI * np.sin(PI * x[..., 0]) * np.sin(0.5 * PI * x[..., 1])
    return g


class ExactSolution:
    """Closed-form manufactured fields and forcing for given physical parameters."""

    def __init__(self, params: PhysicalParams | None = None):
        self.params = params or PhysicalParams()

    # -- fields -----------------------------------------------------------
    def u(self, t, x):
        x = np.asarray(x, dtype=float)
        return PI * np.cos(PI * t) * _a(x)

    def grad_u(self, t, x):
        return PI * np.cos(PI * t) * _grad_a(np.asarray(x, dtype=float))

    def pi(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.exp(t) * _bump(x) + 2.0 * PI * np.cos(PI * t)

    def eta(self, t, x):
        return np.sin(PI * t) * _a(np.asarray(x, dtype=float))

    def grad_eta(self, t, x):
        return np.sin(PI * t) * _grad_a(np.asarray(x, dtype=float))

    def xi(self, t, x):
        return PI * np.cos(PI * t) * _a(np.asarray(x, dtype=float))

    def p(self, t, x):
        return np.exp(t) * _bump(np.asarray(x, dtype=float))

    def grad_p(self, t, x):
        return np.exp(t) * _grad_bump(np.asarray(x, dtype=float))

    def exact_fields(self, t, x):
        return self.u(t, x), self.pi(t, x), self.eta(t, x), self.xi(t, x), self.p(t, x)

    # -- derived data -----------------------------------------------------
    def h_div(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], -2.0 * PI * np.cos(PI * t))

    def forcing_fields(self, t, x):
        """Return ``(F_F, F_B, g, h_div)`` at time ``t`` and points ``x``."""
        prm = self.params
        x = np.asarray(x, dtype=float)
        c, s = np.cos(PI * t), np.sin(PI * t)
        a = _a(x)
        cos_y = np.cos(x[..., 1])
        grad_pb = np.exp(t) * _grad_bump(x)
        pb = np.exp(t) * _bump(x)

        # div(2 mu D(a)) = (-mu cos y, 0); the lambda div term is constant
        F_F = -PI**2 * s * a
        F_F[..., 0] += (prm.mu_F * PI * c * cos_y + grad_pb[..., 0]) / prm.rho_F
        F_F[..., 1] += grad_pb[..., 1] / prm.rho_F

        F_B = -PI**2 * s * a
        F_B[..., 0] += (prm.mu_B * s * cos_y + prm.alpha * grad_pb[..., 0]) / prm.rho_B
        F_B[..., 1] += prm.alpha * grad_pb[..., 1] / prm.rho_B

        # laplacian of the bump is -(5/4) pi^2 times the bump
        g = prm.c0 * pb - 2.0 * prm.alpha * PI * c + prm.kappa * 1.25 * PI**2 * pb
        return F_F, F_B, g, self.h_div(t, x)

    def traction(self, t, x, n):
        """``sigma_F(u, pi) n`` with ``sigma_F = 2 mu_F D(u) - pi I``."""
        x = np.asarray(x, dtype=float)
        n = np.broadcast_to(np.asarray(n, dtype=float), x.shape)
        gu = self.grad_u(t, x)
        D = 0.5 * (gu + np.swapaxes(gu, -1, -2))
        sigma = 2.0 * self.params.mu_F * D
        sigma[..., 0, 0] -= self.pi(t, x)
        sigma[..., 1, 1] -= self.pi(t, x)
        return np.einsum("...ij,...j->...i", sigma, n)


class ManufacturedData(ProblemData):
    """Boundary, initial and forcing data for the convergence study.

    Fluid traction on the top edge, fluid Dirichlet elsewhere; structure and
    Biot pressure Dirichlet on all four edges.
    """

    u_dirichlet = ("bottom", "left", "right")
    u_traction = ("top",)
    eta_dirichlet = ("bottom", "right", "top", "left")
    p_dirichlet = ("bottom", "right", "top", "left")

    def __init__(self, exact: ExactSolution):
        self.exact = exact

    def forcing(self, t, x):
        return self.exact.forcing_fields(t, x)

    def u_value(self, t, x):
        return self.exact.u(t, x)

    def eta_value(self, t, x):
        return self.exact.eta(t, x)

    def xi_value(self, t, x):
        return self.exact.xi(t, x)

    def p_value(self, t, x):
        return self.exact.p(t, x)

    def traction(self, t, x, n, tag):
        return self.exact.traction(t, x, n)

    def initial(self, x):
        e = self.exact
        return e.u(0.0, x), e.pi(0.0, x), e.xi(0.0, x), e.eta(0.0, x), e.p(0.0, x)


class ForcingOnlyData(ManufacturedData):
    """Manufactured body forces with homogeneous boundary and initial data.

    Used for the discrete energy audit, where every Dirichlet value is zero and
    the top edge is traction free.
    """

    def __init__(self, exact: ExactSolution, scale: float = 1.0, with_divergence: bool = False):
        super().__init__(exact)
        self.scale = scale
        self.with_divergence = with_divergence

    def forcing(self, t, x):
        F_F, F_B, g, h = self.exact.forcing_fields(t, x)
        k = self.scale
        h = k * h if self.with_divergence else np.zeros_like(h)
        return k * F_F, k * F_B, k * g, h

    def u_value(self, t, x):
        return np.zeros(np.shape(x))

    def eta_value(self, t, x):
        return np.zeros(np.shape(x))

    def xi_value(self, t, x):
        return np.zeros(np.shape(x))

    def p_value(self, t, x):
        return np.zeros(np.shape(x)[:-1])

    def traction(self, t, x, n, tag):
        return np.zeros(np.shape(x))

    def initial(self, x):
        z2 = np.zeros(np.shape(x))
        z1 = np.zeros(np.shape(x)[:-1])
        return z2, z1, z2, z2.copy(), z1.copy()
