"""Phase field weights for the fluid and poroelastic regions.

The fluid weight is ``phi_F = (1 + S(d / eps)) / 2`` where ``d`` is a signed
distance (or level-set argument) that is positive on the fluid side and ``S``
is either the power-type shape function or ``tanh``. Both weights are then
regularized to ``(1 - 2 delta) phi + delta`` so they never vanish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, quadrature_rule

GEOMETRIES = ("horizontal_line", "circle_level_set", "channel_band")
FAMILIES = ("power", "tanh")


@dataclass(frozen=True)
class InterfaceGeometry:
    """Location of the interface.

    ``horizontal_line``: fluid above ``y = y_gamma``; the argument is the
    exact signed distance ``y - y_gamma``.
    ``circle_level_set``: fluid inside the circle of radius ``radius`` centred
    at ``center``; argument ``-(|x - c|^2 - r^2)``.
    ``channel_band``: fluid in the band ``|y - center_y| < radius``; argument
    ``-((y - c_y)^2 - r^2)``. Used for the 2D channel demo.
    """

    kind: str = "horizontal_line"
    y_gamma: float = 0.0
    radius: float = 0.5
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in GEOMETRIES:
            raise ValueError(f"unknown interface geometry {self.kind!r}")
        if self.kind != "horizontal_line" and self.radius <= 0:
            raise ValueError("radius must be positive")

    def argument(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "horizontal_line":
            return x[..., 1] - self.y_gamma
        if self.kind == "circle_level_set":
            dx = x[..., 0] - self.center[0]
            dy = x[..., 1] - self.center[1]
            return -(dx**2 + dy**2 - self.radius**2)
        dy = x[..., 1] - self.center[1]
        return -(dy**2 - self.radius**2)

    def grad_argument(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1] + (2,))
        if self.kind == "horizontal_line":
            g[..., 1] = 1.0
        elif self.kind == "circle_level_set":
            g[..., 0] = -2.0 * (x[..., 0] - self.center[0])
            g[..., 1] = -2.0 * (x[..., 1] - self.center[1])
        else:
            g[..., 1] = -2.0 * (x[..., 1] - self.center[1])
        return g


@dataclass(frozen=True)
class WeightFamily:
    kind: str = "tanh"
    beta: float = 0.9

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown weight family {self.kind!r}")
        if self.kind == "power" and not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class PhaseField:
    geometry: InterfaceGeometry
    family: WeightFamily
    epsilon: float
    delta: float = 1e-3

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        # delta = 1/2 collapses both weights to 1/2; allowed as a limit case
        if not (0.0 <= self.delta <= 0.5):
            raise ValueError(f"delta must lie in [0, 1/2], got {self.delta}")

    def phi(self, x):
        return eval_phi(self, x)

    def grad_phi(self, x):
        return eval_grad_phi(self, x)


def shape_S(t, beta: float):
    """Power-type shape function: -1 below -1, +1 above 1, Hoelder in between."""
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0, 1.0, -1.0)
    left = (t > -1.0) & (t <= 0.0)
    right = (t > 0.0) & (t <= 1.0)
    out = np.where(left, (np.clip(t, -1, 0) + 1.0) ** beta - 1.0, out)
    out = np.where(right, 1.0 - (1.0 - np.clip(t, 0, 1)) ** beta, out)
    return out[()] if out.ndim == 0 else out


def shape_S_prime(t, beta: float):
    """Derivative of :func:`shape_S`; zero on the constant branches.

    The derivative is unbounded as ``|t| -> 1`` from inside; the points
    ``t = +-1`` themselves are assigned the value of the outer branch (0).
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    left = (t > -1.0) & (t <= 0.0)
    right = (t > 0.0) & (t < 1.0)
    with np.errstate(divide="ignore"):
        out = np.where(left, beta * (np.clip(t, -1, 0) + 1.0) ** (beta - 1.0), out)
        out = np.where(right, beta * (1.0 - np.clip(t, 0, 1)) ** (beta - 1.0), out)
    return out[()] if out.ndim == 0 else out


def _unregularized(pf: PhaseField, x):
    a = pf.geometry.argument(x) / pf.epsilon
    if pf.family.kind == "tanh":
        return 0.5 * (1.0 + np.tanh(a))
    return 0.5 * (1.0 + shape_S(a, pf.family.beta))


def eval_phi(pf: PhaseField, x):
    """Regularized weights ``(phi_F, phi_B)`` at points ``x`` of shape (..., 2)."""
    phi = _unregularized(pf, x)
    phi_F = (1.0 - 2.0 * pf.delta) * phi + pf.delta
    return phi_F, 1.0 - phi_F


def eval_grad_phi(pf: PhaseField, x):
    """Gradient of the regularized fluid weight; the solid weight has the opposite gradient."""
    a = pf.geometry.argument(x) / pf.epsilon
    if pf.family.kind == "tanh":
        ds = 1.0 / np.cosh(np.clip(a, -350, 350)) ** 2
    else:
        ds = shape_S_prime(a, pf.family.beta)
    scale = (1.0 - 2.0 * pf.delta) * 0.5 * ds / pf.epsilon
    return np.asarray(scale)[..., None] * pf.geometry.grad_argument(x)


def normal_tangent_frame(grad_phi_F, tol: float = 0.0):
    """Diffuse normal ``n = -grad/|grad|`` and tangent ``tau = (-n_y, n_x)``.

    Returns ``(n, tau, degenerate)``. Where ``|grad| <= tol`` the frame is
    flagged degenerate and both vectors are set to zero.
    """
    g = np.asarray(grad_phi_F, dtype=float)
    mag = np.linalg.norm(g, axis=-1)
    degenerate = mag <= tol
    safe = np.where(degenerate, 1.0, mag)
    n = -g / safe[..., None]
    n = np.where(degenerate[..., None], 0.0, n)
    tau = np.stack([-n[..., 1], n[..., 0]], axis=-1)
    return n, tau, degenerate


def frame_tolerance(pf: PhaseField) -> float:
    return 1e-14 / (2.0 * pf.epsilon)


def layer_measure(pf: PhaseField, mesh: Mesh, threshold: float, degree: int = 6) -> float:
    """Quadrature measure of ``{threshold < phi_F < 1 - threshold}`` (unregularized)."""
    if not (0.0 < threshold < 0.5):
        raise ValueError("threshold must lie in (0, 1/2)")
    from .fem import integrate_weighted

    def indicator(x):
        phi = _unregularized(pf, x)
        return ((phi > threshold) & (phi < 1.0 - threshold)).astype(float)

    return integrate_weighted(mesh, quadrature_rule(degree), indicator, lambda x: 1.0)


def layer_cells(mesh: Mesh, pf: PhaseField, width: float | None = None) -> np.ndarray:
    """Boolean mask of triangles meeting the transition layer ``|arg| < width * eps``.

    The default width is the support of the power-type transition (1) or the
    range where ``tanh`` is still far from saturated (4). The argument is
    sampled at vertices, edge midpoints and the centroid.
    """
    if width is None:
        width = 1.0 if pf.family.kind == "power" else 4.0
    p = mesh.vertices[mesh.triangles]
    samples = np.concatenate(
        [p, 0.5 * (p + np.roll(p, -1, axis=1)), p.mean(axis=1, keepdims=True)], axis=1
    )
    a = pf.geometry.argument(samples)
    lim = width * pf.epsilon
    return (a.min(axis=1) < lim) & (a.max(axis=1) > -lim)
