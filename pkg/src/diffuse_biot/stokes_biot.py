"""Monolithic diffuse-interface Stokes-Biot time stepping.

Unknowns per step are the fluid velocity ``u``, a fluid pressure (``pi`` in
the weighted formulation, ``theta = phi_F pi`` in the theta formulation), the
structure velocity ``xi`` and the Biot pressure ``p``. The displacement is
advanced afterwards with ``eta^{n+1} = eta^n + dt xi^{n+1}``.

Every integral is taken over the whole rectangle and weighted by the
regularized phase fields. The interface coupling uses ``grad phi_F`` as a
diffuse surface measure times normal::

    v-row:   - int p v . grad(phi_F)       q-row:  + int q u . grad(phi_F)
    phi-row: + int p phi . grad(phi_F)     q-row:  - int q xi . grad(phi_F)

plus the Beavers-Joseph-Saffman term ``alpha_BJ int |grad phi_F|
((u - xi) . tau)((v - phi) . tau)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import fem
from .fem import DirectSolver, FunctionSpace, Geometry, LinearSolveError, SparseSystem
from .mesh import Mesh, composite_rule, gauss_segment, quadrature_rule
from .phasefield import PhaseField, frame_tolerance, layer_cells, normal_tangent_frame

log = logging.getLogger(__name__)

TIME_SCHEMES = ("backward_euler", "midpoint")
FORMULATIONS = ("weighted", "theta")
ELEMENT_PAIRS = ("P2P1", "P1P1_stabilized")


@dataclass(frozen=True)
class PhysicalParams:
    """Material coefficients; the defaults are the unit values of the convergence study."""

    rho_F: float = 1.0
    rho_B: float = 1.0
    mu_F: float = 1.0
    mu_B: float = 1.0
    lambda_B: float = 1.0
    alpha: float = 1.0
    c0: float = 1.0
    kappa: float = 1.0
    alpha_BJ: float = 1.0
    gamma_stab: float = 0.0

    def __post_init__(self):
        for name in ("rho_F", "rho_B", "mu_F", "mu_B", "lambda_B", "c0", "kappa", "alpha_BJ"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.gamma_stab < 0:
            raise ValueError("gamma_stab must be nonnegative")

    @staticmethod
    def lame_from_young(E: float, nu: float):
        """``(mu, lambda)`` from Young's modulus and Poisson's ratio."""
        return E / (2.0 * (1.0 + nu)), E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))


@dataclass(frozen=True)
class SchemeConfig:
    time_scheme: str = "backward_euler"
    formulation: str = "weighted"
    element_pair: str = "P2P1"
    dt: float = 0.1
    T: float = 0.8
    quad_degree: int = 4
    layer_levels: int = 3

    def __post_init__(self):
        if self.time_scheme not in TIME_SCHEMES:
            raise ValueError(f"unknown time scheme {self.time_scheme!r}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.element_pair not in ELEMENT_PAIRS:
            raise ValueError(f"unknown element pair {self.element_pair!r}")
        if self.layer_levels < 0:
            raise ValueError("layer_levels must be nonnegative")
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class State:
    n: int
    t: float
    u: np.ndarray
    pressure: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    p: np.ndarray

    def fields(self):
        return {"u": self.u, "pressure": self.pressure, "xi": self.xi, "eta": self.eta, "p": self.p}

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) if len(v) else 0.0 for v in self.fields().values())


class ProblemData:
    """Forcing, boundary and initial data. Subclasses override what they need.

    ``*_dirichlet`` list boundary tags with Dirichlet data for the velocity,
    the displacement (imposed through ``xi``) and the Biot pressure;
    ``u_traction`` lists tags carrying a prescribed fluid traction. All other
    boundary conditions are homogeneous natural ones. On displacement
    Dirichlet edges both ``xi`` and ``eta`` take their data values.
    """

    u_dirichlet: tuple = ()
    u_traction: tuple = ()
    eta_dirichlet: tuple = ()
    p_dirichlet: tuple = ()

    def forcing(self, t, x):
        """``(F_F, F_B, g, h_div)`` at points ``x``."""
        z2 = np.zeros(np.shape(x))
        z1 = np.zeros(np.shape(x)[:-1])
        return z2, z2.copy(), z1, z1.copy()

    def u_value(self, t, x):
        return np.zeros(np.shape(x))

    def eta_value(self, t, x):
        return np.zeros(np.shape(x))

    def xi_value(self, t, x):
        """Structure velocity on ``eta_dirichlet`` edges; should equal d(eta_value)/dt."""
        return np.zeros(np.shape(x))

    def p_value(self, t, x):
        return np.zeros(np.shape(x)[:-1])

    def traction(self, t, x, n, tag):
        return np.zeros(np.shape(x))

    def initial(self, x):
        """``(u, pi, xi, eta, p)`` at ``t = 0``."""
        z2 = np.zeros(np.shape(x))
        z1 = np.zeros(np.shape(x)[:-1])
        return z2, z1, z2.copy(), z2.copy(), z1.copy()


class ZeroData(ProblemData):
    """Homogeneous data with the same boundary layout as the convergence study."""

    u_dirichlet = ("bottom", "left", "right")
    u_traction = ("top",)
    eta_dirichlet = ("bottom", "right", "top", "left")
    p_dirichlet = ("bottom", "right", "top", "left")


class StepFailure(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"time step {step} failed: {cause}")
        self.step = step
        self.cause = cause


class Discretization:
    """Spaces, assembled weighted forms and cached factorizations for one mesh."""

    def __init__(self, mesh: Mesh, params: PhysicalParams, scheme: SchemeConfig, pf: PhaseField):
        if scheme.element_pair == "P1P1_stabilized" and params.gamma_stab <= 0:
            raise ValueError("P1P1_stabilized requires gamma_stab > 0")
        self.mesh = mesh
        self.params = params
        self.scheme = scheme
        self.pf = pf
        if scheme.element_pair == "P2P1":
            vdeg, qdeg, xdeg = 2, 1, 2
        else:
            vdeg, qdeg, xdeg = 1, 1, 1
        self.V = FunctionSpace(mesh, vdeg, 2)  # fluid velocity
        self.Q = FunctionSpace(mesh, qdeg, 1)  # fluid pressure
        self.W = FunctionSpace(mesh, vdeg, 2)  # structure velocity / displacement
        self.X = FunctionSpace(mesh, xdeg, 1)  # Biot pressure
        sizes = [self.V.dim, self.Q.dim, self.W.dim, self.X.dim]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.size = int(self.offsets[-1])

        self.parts = quadrature_parts(mesh, pf, scheme)
        self._assemble_forms()
        self._solvers = {}

    # -- assembly ------------------------------------------------------------
    def _sum(self, form):
        out = form(self.parts[0])
        for part in self.parts[1:]:
            out = out + form(part)
        return out

    def _assemble_forms(self):
        prm = self.params
        V, Q, W, X = self.V, self.Q, self.W, self.X
        self.M_u = self._sum(lambda q: fem.mass_matrix(V, q.geo, q.phi_F))
        self.K_u = self._sum(lambda q: fem.strain_matrix(V, q.geo, q.phi_F, 2.0 * prm.mu_F, 0.0))
        self.B = self._sum(lambda q: fem.divergence_matrix(Q, V, q.geo, self._div_weight(q)))
        if self.scheme.element_pair == "P1P1_stabilized":
            h2 = self.mesh.diameters() ** 2

            def stab(q):
                h2q = h2 if q.geo.cells is None else h2[q.geo.cells]
                w = prm.gamma_stab * np.broadcast_to(h2q[:, None], q.phi_F.shape)
                return fem.stiffness_matrix(Q, q.geo, w)

            self.S = self._sum(stab)
        else:
            self.S = sp.csr_matrix((Q.dim, Q.dim))
        self.M_xi = self._sum(lambda q: fem.mass_matrix(W, q.geo, q.phi_B))
        self.E = self._sum(lambda q: fem.strain_matrix(W, q.geo, q.phi_B, 2.0 * prm.mu_B, prm.lambda_B))
        self.M_p = self._sum(lambda q: fem.mass_matrix(X, q.geo, q.phi_B))
        self.K_p = self._sum(lambda q: fem.stiffness_matrix(X, q.geo, prm.kappa * q.phi_B))
        self.C = prm.alpha * self._sum(lambda q: fem.divergence_matrix(X, W, q.geo, q.phi_B))
        self.I_phi = self._sum(lambda q: fem.vector_scalar_matrix(W, X, q.geo, q.grad_phi))
        self.I_v = -self._sum(lambda q: fem.vector_scalar_matrix(V, X, q.geo, q.grad_phi))
        self.T = prm.alpha_BJ * self._sum(lambda q: fem.tangential_matrix(V, q.geo, q.grad_norm, q.tau))

    def _div_weight(self, q):
        return q.phi_F if self.scheme.formulation == "weighted" else np.ones_like(q.phi_F)

    def operator(self, k: float) -> sp.csr_matrix:
        """Step matrix for step size ``k`` before Dirichlet rows are applied."""
        prm = self.params
        A_uu = prm.rho_F / k * self.M_u + self.K_u + self.T
        A_xx = prm.rho_B / k * self.M_xi + k * self.E + self.T
        A_pp = prm.c0 / k * self.M_p + self.K_p
        blocks = [
            [A_uu, -self.B.T, -self.T, self.I_v],
            [self.B, self.S, None, None],
            [-self.T, None, A_xx, -self.C.T + self.I_phi],
            [-self.I_v.T, None, self.C - self.I_phi.T, A_pp],
        ]
        return sp.bmat(blocks, format="csr")

    def dirichlet_dofs(self, data: ProblemData):
        o = self.offsets
        return (
            self.V.boundary_dofs(data.u_dirichlet),
            self.W.boundary_dofs(data.eta_dirichlet),
            self.X.boundary_dofs(data.p_dirichlet),
        ), np.concatenate(
            [
                o[0] + self.V.boundary_dofs(data.u_dirichlet),
                o[2] + self.W.boundary_dofs(data.eta_dirichlet),
                o[3] + self.X.boundary_dofs(data.p_dirichlet),
            ]
        )

    def solver(self, k: float, data: ProblemData) -> DirectSolver:
        _, dofs = self.dirichlet_dofs(data)
        key = (round(k, 14), dofs.tobytes())
        if key not in self._solvers:
            A = fem.dirichlet_rows(self.operator(k), dofs)
            self._solvers[key] = DirectSolver(A)
        return self._solvers[key]

    def traction_vector(self, t: float, data: ProblemData) -> np.ndarray:
        """``int_{edges} phi_F t . v ds`` over the traction edges."""
        V, mesh = self.V, self.mesh
        out = np.zeros(V.dim)
        s, ws = gauss_segment(4)
        for tag in data.u_traction:
            edges = mesh.boundary_edges[mesh.boundary_tags == tag]
            if not len(edges):
                continue
            a = mesh.vertices[edges[:, 0]]
            b = mesh.vertices[edges[:, 1]]
            d = b - a
            length = np.linalg.norm(d, axis=1)
            normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
            x = a[:, None, :] + s[None, :, None] * d[:, None, :]
            if V.degree == 1:
                nodes = edges
                basis = np.column_stack([1 - s, s])
            else:
                nodes = np.column_stack([edges, mesh.n_vertices + mesh.edge_index(edges)])
                basis = np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])
            nrm = np.broadcast_to(normal[:, None, :], x.shape)
            trac = np.asarray(data.traction(t, x, nrm, tag), dtype=float)
            phi_F, _ = self.pf.phi(x)
            weight = (ws[None, :] * length[:, None]) * phi_F
            local = np.einsum("eq,eqc,qa->eac", weight, trac, basis)
            dofs = 2 * nodes[:, :, None] + np.arange(2)
            out += np.bincount(dofs.ravel(), weights=local.ravel(), minlength=V.dim)
        return out

    def forcing_vector(self, t: float, data: ProblemData) -> np.ndarray:
        """Data part of the right-hand side: body forces, divergence source, tractions."""
        prm = self.params
        f_u, f_q, f_x, f_p = (np.zeros(S.dim) for S in (self.V, self.Q, self.W, self.X))
        for q in self.parts:
            shp = q.geo.points.shape[:2]
            F_F, F_B, g, h = data.forcing(t, q.geo.points.reshape(-1, 2))
            F_F = np.asarray(F_F, dtype=float).reshape(shp + (2,))
            F_B = np.asarray(F_B, dtype=float).reshape(shp + (2,))
            g = np.broadcast_to(np.asarray(g, dtype=float), (shp[0] * shp[1],)).reshape(shp)
            h = np.broadcast_to(np.asarray(h, dtype=float), (shp[0] * shp[1],)).reshape(shp)
            f_u += prm.rho_F * fem.load_vector(self.V, q.geo, q.phi_F[..., None] * F_F)
            f_q += fem.load_vector(self.Q, q.geo, self._div_weight(q) * h)
            f_x += prm.rho_B * fem.load_vector(self.W, q.geo, q.phi_B[..., None] * F_B)
            f_p += fem.load_vector(self.X, q.geo, q.phi_B * g)
        f_u += self.traction_vector(t, data)
        return np.concatenate([f_u, f_q, f_x, f_p])

    def history_vector(self, k: float, state: State) -> np.ndarray:
        prm = self.params
        return np.concatenate(
            [
                prm.rho_F / k * (self.M_u @ state.u),
                np.zeros(self.Q.dim),
                prm.rho_B / k * (self.M_xi @ state.xi) - self.E @ state.eta,
                prm.c0 / k * (self.M_p @ state.p),
            ]
        )

    def _blend(self, current, data_fn, space, dofs, t_target, frac):
        """``current + frac (data(t_target) - current)`` on ``dofs``."""
        if not len(dofs):
            return np.zeros(0)
        nodes = dofs[:: space.components] // space.components
        target = np.asarray(data_fn(t_target, space.node_coords[nodes]), dtype=float).reshape(-1)
        return current[dofs] + frac * (target - current[dofs])

    def boundary_values(self, state: State, data: ProblemData, k: float, t_target: float):
        """Dirichlet values for a step of size ``k`` heading towards ``t_target``.

        Boundary values move the fraction ``k / (t_target - t_n)`` of the way
        to the data at ``t_target``: all the way for backward Euler, half way
        for the midpoint half-step, so that the extrapolated values are exact.
        The structure velocity takes ``xi_value``; the displacement itself is
        reset to ``eta_value`` after the solve (see :meth:`_solve_step`).
        """
        (du, dx, dp), _ = self.dirichlet_dofs(data)
        frac = k / (t_target - state.t)
        return np.concatenate(
            [
                self._blend(state.u, data.u_value, self.V, du, t_target, frac),
                self._blend(state.xi, data.xi_value, self.W, dx, t_target, frac),
                self._blend(state.p, data.p_value, self.X, dp, t_target, frac),
            ]
        )

    # -- stepping ------------------------------------------------------------
    def assemble_step(self, state: State, data: ProblemData, t_next: float,
                      k: float | None = None, t_target: float | None = None) -> SparseSystem:
        """Monolithic system for one implicit step of size ``k`` from ``state``.

        Forcing is evaluated at ``t_next``; ``t_target`` (default ``t_next``)
        is where boundary data is taken, see :meth:`boundary_values`.
        """
        self._check_state(state)
        k = t_next - state.t if k is None else k
        t_target = t_next if t_target is None else t_target
        rhs = self.history_vector(k, state) + self.forcing_vector(t_next, data)
        _, dofs = self.dirichlet_dofs(data)
        rhs[dofs] = self.boundary_values(state, data, k, t_target)
        if not np.all(np.isfinite(rhs)):
            raise ValueError("non-finite entries in the right-hand side")
        A = fem.dirichlet_rows(self.operator(k), dofs)
        return SparseSystem(A, rhs)

    def _solve_step(self, state, data, k, t_force, t_target, rel_tol):
        self._check_state(state)
        rhs = self.history_vector(k, state) + self.forcing_vector(t_force, data)
        _, dofs = self.dirichlet_dofs(data)
        rhs[dofs] = self.boundary_values(state, data, k, t_target)
        if not np.all(np.isfinite(rhs)):
            raise LinearSolveError("non-finite entries in the right-hand side")
        sol = self.solver(k, data).solve(rhs, rel_tol)
        o = self.offsets
        xi = sol[o[2]:o[3]]
        eta = state.eta + k * xi
        (_, dx, _), _ = self.dirichlet_dofs(data)
        eta[dx] = self._blend(state.eta, data.eta_value, self.W, dx, t_target, k / (t_target - state.t))
        return State(
            n=state.n,
            t=state.t + k,
            u=sol[o[0]:o[1]],
            pressure=sol[o[1]:o[2]],
            xi=xi,
            eta=eta,
            p=sol[o[3]:o[4]],
        )

    def step_backward_euler(self, state: State, data: ProblemData, dt: float | None = None,
                            rel_tol: float = 1e-10) -> State:
        dt = self.scheme.dt if dt is None else dt
        t1 = state.t + dt
        new = self._solve_step(state, data, dt, t1, t1, rel_tol)
        return replace(new, n=state.n + 1, t=t1)

    def step_midpoint(self, state: State, data: ProblemData, dt: float | None = None,
                      rel_tol: float = 1e-10) -> State:
        dt = self.scheme.dt if dt is None else dt
        t1 = state.t + dt
        half = self._solve_step(state, data, 0.5 * dt, state.t + 0.5 * dt, t1, rel_tol)
        return extrapolate(state, half, n=state.n + 1, t=t1)

    def step(self, state, data, rel_tol=1e-10):
        if self.scheme.time_scheme == "midpoint":
            return self.step_midpoint(state, data, rel_tol=rel_tol)
        return self.step_backward_euler(state, data, rel_tol=rel_tol)

    def initial_state(self, data: ProblemData) -> State:
        """Nodal interpolation of the initial fields."""
        V, Q, W, X = self.V, self.Q, self.W, self.X
        u = V.interpolate(lambda x: data.initial(x)[0])
        pi = Q.interpolate(lambda x: data.initial(x)[1])
        if self.scheme.formulation == "theta":
            pi = pi * self.pf.phi(Q.node_coords)[0]
        xi = W.interpolate(lambda x: data.initial(x)[2])
        eta = W.interpolate(lambda x: data.initial(x)[3])
        p = X.interpolate(lambda x: data.initial(x)[4])
        return State(0, 0.0, u, pi, xi, eta, p)

    def zero_state(self) -> State:
        return State(0, 0.0, np.zeros(self.V.dim), np.zeros(self.Q.dim),
                     np.zeros(self.W.dim), np.zeros(self.W.dim), np.zeros(self.X.dim))

    def _check_state(self, state: State):
        dims = {"u": self.V.dim, "pressure": self.Q.dim, "xi": self.W.dim,
                "eta": self.W.dim, "p": self.X.dim}
        for name, vec in state.fields().items():
            if len(vec) != dims[name]:
                raise ValueError(f"state field {name} has length {len(vec)}, expected {dims[name]}")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"state field {name} has non-finite entries")


@dataclass
class QuadraturePart:
    """A group of cells sharing one quadrature rule, with the phase field sampled on it."""

    geo: Geometry
    phi_F: np.ndarray
    phi_B: np.ndarray
    grad_phi: np.ndarray
    grad_norm: np.ndarray
    tau: np.ndarray

    @classmethod
    def build(cls, mesh, rule, pf, cells=None):
        geo = Geometry(mesh, rule, cells)
        phi_F, phi_B = pf.phi(geo.points)
        grad = pf.grad_phi(geo.points)
        _, tau, _ = normal_tangent_frame(grad, frame_tolerance(pf))
        return cls(geo, phi_F, phi_B, grad, np.linalg.norm(grad, axis=-1), tau)


def quadrature_parts(mesh: Mesh, pf: PhaseField, scheme: SchemeConfig):
    """Standard rule on smooth cells, composite rule on cells inside the layer."""
    rule = quadrature_rule(scheme.quad_degree)
    if scheme.layer_levels == 0:
        return [QuadraturePart.build(mesh, rule, pf)]
    inside = layer_cells(mesh, pf)
    parts = []
    if np.any(~inside):
        parts.append(QuadraturePart.build(mesh, rule, pf, np.flatnonzero(~inside)))
    if np.any(inside):
        fine = composite_rule(rule, scheme.layer_levels)
        parts.append(QuadraturePart.build(mesh, fine, pf, np.flatnonzero(inside)))
    return parts


def extrapolate(state: State, half: State, n: int, t: float) -> State:
    """``w^{n+1} = 2 w^{n+1/2} - w^n`` for u, xi, eta, p; pressure kept from the half-step."""
    return State(
        n=n,
        t=t,
        u=2.0 * half.u - state.u,
        pressure=half.pressure,
        xi=2.0 * half.xi - state.xi,
        eta=2.0 * half.eta - state.eta,
        p=2.0 * half.p - state.p,
    )


def assemble_step(disc: Discretization, state_n: State, data: ProblemData, t_next: float) -> SparseSystem:
    return disc.assemble_step(state_n, data, t_next)


def recover_pi_from_theta(theta, pf: PhaseField, coords) -> np.ndarray:
    """Nodal fluid pressure ``theta / phi_F`` at the pressure nodes ``coords``."""
    if pf.delta <= 0:
        raise ValueError("pressure recovery needs delta > 0 (phi_F may vanish)")
    phi_F, _ = pf.phi(np.asarray(coords, dtype=float))
    return np.asarray(theta, dtype=float) / phi_F


@dataclass
class SimulationConfig:
    mesh: Mesh
    params: PhysicalParams
    scheme: SchemeConfig
    phasefield: PhaseField
    data: ProblemData = field(default_factory=ProblemData)
    rel_tol: float = 1e-10


@dataclass
class SimulationResult:
    state: State
    discretization: Discretization
    trajectory: list | None = None


def run_simulation(config: SimulationConfig, keep_trajectory: bool = False,
                   callback=None, initial: State | None = None) -> SimulationResult:
    """Run ``T / dt`` steps from the interpolated initial data.

    ``callback(disc, state)`` is called after every step; returning ``True``
    stops the run early.
    """
    disc = Discretization(config.mesh, config.params, config.scheme, config.phasefield)
    state = disc.initial_state(config.data) if initial is None else initial
    trajectory = [state] if keep_trajectory else None
    for n in range(config.scheme.n_steps):
        try:
            state = disc.step(state, config.data, rel_tol=config.rel_tol)
        except (LinearSolveError, ValueError, FloatingPointError) as exc:
            raise StepFailure(n + 1, exc) from exc
        if keep_trajectory:
            trajectory.append(state)
        if callback is not None and callback(disc, state):
            break
    log.debug("finished %d steps, t=%g", state.n, state.t)
    return SimulationResult(state, disc, trajectory)
