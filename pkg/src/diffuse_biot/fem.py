"""Lagrange P1/P2 spaces on triangles, weighted element kernels and sparse solves.

All kernels are vectorized over triangles. A weight is passed in as an array
of values at the quadrature points, shape ``(n_triangles, n_qp)``, which lets
the same kernel serve unweighted, phase-field weighted and interface forms.
Matrices follow the convention ``A[i, j] = a(trial_j, test_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, QuadratureRule

# d(lambda_k)/d(x, y) on the reference triangle
_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
# local P2 node 3 + k sits on the edge opposite vertex k
_EDGE_VERTS = ((1, 2), (2, 0), (0, 1))


class LinearSolveError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def eval_basis(degree: int, point):
    """Values and reference gradients of the Lagrange basis at barycentric ``point``.

    ``point`` may be a single triple or an array ``(n, 3)``. Returns
    ``values`` of shape ``(..., nloc)`` and ``gradients`` of shape
    ``(..., nloc, 2)`` with respect to reference coordinates ``(l1, l2)``.
    """
    lam = np.asarray(point, dtype=float)
    if degree == 1:
        values = lam.copy()
        grads = np.broadcast_to(_DLAMBDA, lam.shape[:-1] + (3, 2)).copy()
        return values, grads
    if degree != 2:
        raise ValueError(f"unsupported degree {degree}")
    shape = lam.shape[:-1]
    values = np.empty(shape + (6,))
    grads = np.empty(shape + (6, 2))
    for k in range(3):
        values[..., k] = lam[..., k] * (2.0 * lam[..., k] - 1.0)
        grads[..., k, :] = (4.0 * lam[..., k])[..., None] - 1.0
        grads[..., k, :] = grads[..., k, :] * _DLAMBDA[k]
    for k, (i, j) in enumerate(_EDGE_VERTS):
        values[..., 3 + k] = 4.0 * lam[..., i] * lam[..., j]
        grads[..., 3 + k, :] = 4.0 * (
            lam[..., i, None] * _DLAMBDA[j] + lam[..., j, None] * _DLAMBDA[i]
        )
    return values, grads


class Geometry:
    """Affine maps of a set of triangles together with one quadrature rule.

    ``cells`` restricts the geometry to a subset of the triangles (all of
    them by default); assembly routines then only visit that subset.
    """

    def __init__(self, mesh: Mesh, quad: QuadratureRule, cells=None):
        self.mesh = mesh
        self.quad = quad
        self.cells = None if cells is None else np.asarray(cells, dtype=np.int64)
        tris = mesh.triangles if self.cells is None else mesh.triangles[self.cells]
        p = mesh.vertices[tris]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        self.det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 1, 1] = J[:, 0, 0]
        inv[:, 0, 1] = -J[:, 0, 1]
        inv[:, 1, 0] = -J[:, 1, 0]
        inv /= self.det[:, None, None]
        self.inv_jac_t = np.transpose(inv, (0, 2, 1))
        # physical quadrature points (nt, nq, 2) and measures (nt, nq)
        self.points = np.einsum("qk,tkd->tqd", quad.points, p)
        self.dx = np.abs(self.det)[:, None] * quad.weights[None, :]
        self._grad_cache = {}

    @property
    def n_cells(self) -> int:
        return len(self.det)

    def cell_dofs(self, space) -> np.ndarray:
        return space.cell_dofs if self.cells is None else space.cell_dofs[self.cells]

    def evaluate(self, f):
        """Evaluate ``f`` on all quadrature points, broadcasting scalars."""
        flat = self.points.reshape(-1, 2)
        val = np.asarray(f(flat), dtype=float)
        if val.ndim == 0:
            return np.full(self.points.shape[:2], float(val))
        return val.reshape(self.points.shape[:2] + val.shape[1:])


class FunctionSpace:
    """Continuous Lagrange space of degree 1 or 2 with 1 or 2 components.

    Vector dofs are interleaved by node: ``dof = components * node + c``.
    P2 nodes are the mesh vertices followed by the edge midpoints in the
    order of :meth:`Mesh.edges`.
    """

    def __init__(self, mesh: Mesh, degree: int, components: int = 1):
        if degree not in (1, 2) or components not in (1, 2):
            raise ValueError("degree must be 1 or 2 and components 1 or 2")
        self.mesh = mesh
        self.degree = degree
        self.components = components
        if degree == 1:
            self.node_coords = mesh.vertices.copy()
            self.cell_nodes = mesh.triangles.copy()
        else:
            edges, tri_edges = mesh.edges()
            nv = mesh.n_vertices
            mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
            self.node_coords = np.vstack([mesh.vertices, mids])
            self.cell_nodes = np.hstack([mesh.triangles, nv + tri_edges])
        self.n_nodes = len(self.node_coords)
        self.nloc = self.cell_nodes.shape[1]
        c = components
        self.cell_dofs = (c * self.cell_nodes[:, :, None] + np.arange(c)).reshape(
            len(self.cell_nodes), -1
        )

    @property
    def dim(self) -> int:
        return self.n_nodes * self.components

    def boundary_nodes(self, tag: str) -> np.ndarray:
        mesh = self.mesh
        sel = mesh.boundary_edges[mesh.boundary_tags == tag]
        nodes = [np.unique(sel)]
        if self.degree == 2 and len(sel):
            nodes.append(mesh.n_vertices + mesh.edge_index(sel))
        return np.unique(np.concatenate(nodes))

    def boundary_dofs(self, tags) -> np.ndarray:
        if isinstance(tags, str):
            tags = [tags]
        if not tags:
            return np.zeros(0, dtype=np.int64)
        nodes = np.unique(np.concatenate([self.boundary_nodes(t) for t in tags]))
        c = self.components
        return (c * nodes[:, None] + np.arange(c)).ravel()

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolant of ``f``; vector fields return interleaved coefficients."""
        vals = np.asarray(f(self.node_coords), dtype=float)
        if self.components == 1:
            return np.broadcast_to(vals, (self.n_nodes,)).copy()
        return np.broadcast_to(vals, (self.n_nodes, 2)).reshape(-1).copy()

    def tabulate(self, geo: Geometry):
        """Basis values ``(nq, nloc)`` and physical gradients ``(nt, nq, nloc, 2)``."""
        values, ref_grads = eval_basis(self.degree, geo.quad.points)
        cache = geo._grad_cache
        grads = cache.get(self.degree)
        if grads is None:
            grads = np.einsum("tij,qaj->tqai", geo.inv_jac_t, ref_grads, optimize=True)
            cache[self.degree] = grads
        return values, grads

    def eval_at_quadrature(self, coeffs, geo: Geometry, gradient=False):
        """Values (and optionally gradients) of a finite element function at quadrature points."""
        values, grads = self.tabulate(geo)
        c = self.components
        dofs = geo.cell_dofs(self)
        local = np.asarray(coeffs)[dofs].reshape(len(dofs), self.nloc, c)
        val = np.einsum("qa,tac->tqc", values, local)
        if c == 1:
            val = val[..., 0]
        if not gradient:
            return val
        grad = np.einsum("tqai,tac->tqci", grads, local)
        if c == 1:
            grad = grad[..., 0, :]
        return val, grad


def integrate_weighted(mesh: Mesh, quad: QuadratureRule, f, w) -> float:
    """Quadrature approximation of the integral of ``f * w`` over the mesh."""
    geo = Geometry(mesh, quad)
    return float(np.sum(geo.dx * geo.evaluate(f) * geo.evaluate(w)))


def _global(test: FunctionSpace, trial: FunctionSpace, local: np.ndarray, geo: Geometry):
    rows = np.broadcast_to(geo.cell_dofs(test)[:, :, None], local.shape)
    cols = np.broadcast_to(geo.cell_dofs(trial)[:, None, :], local.shape)
    A = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=(test.dim, trial.dim)
    )
    return A.tocsr()


def _interleave(local4: np.ndarray) -> np.ndarray:
    """(nt, a, c, b, d) -> (nt, a*c, b*d) matching interleaved dof ordering."""
    nt, na, nc, nb, nd = local4.shape
    return local4.reshape(nt, na * nc, nb * nd)


def mass_matrix(space: FunctionSpace, geo: Geometry, weight) -> sp.csr_matrix:
    """Weighted mass matrix ``int w u . v``."""
    N, _ = space.tabulate(geo)
    local = np.einsum("tq,qa,qb->tab", geo.dx * weight, N, N, optimize=True)
    if space.components == 2:
        eye = np.eye(2)
        local = _interleave(np.einsum("tab,cd->tacbd", local, eye))
    return _global(space, space, local, geo)


def stiffness_matrix(space: FunctionSpace, geo: Geometry, weight) -> sp.csr_matrix:
    """Weighted scalar stiffness ``int w grad u . grad v``."""
    _, G = space.tabulate(geo)
    local = np.einsum("tq,tqai,tqbi->tab", geo.dx * weight, G, G, optimize=True)
    return _global(space, space, local, geo)


def strain_matrix(space: FunctionSpace, geo: Geometry, weight, two_mu: float, lam: float):
    """``int w (two_mu D(u):D(v) + lam div u div v)`` for a vector space."""
    _, G = space.tabulate(geo)
    dot = np.einsum("tq,tqai,tqbi->tab", geo.dx * weight, G, G, optimize=True)
    outer = np.einsum("tq,tqai,tqbj->tabij", geo.dx * weight, G, G, optimize=True)
    eye = np.eye(2)
    # rows: test (b, d); cols: trial (a, c); this form is symmetric
    sym = 0.5 * two_mu * (
        np.einsum("tab,cd->tacbd", dot, eye) + np.einsum("tabdc->tacbd", outer)
    )
    div = lam * np.einsum("tabcd->tacbd", outer)
    local = _interleave(sym + div)
    local = np.transpose(local, (0, 2, 1))
    return _global(space, space, local, geo)


def divergence_matrix(scalar: FunctionSpace, vector: FunctionSpace, geo: Geometry, weight):
    """``int w (div u) q`` with rows indexed by the scalar test function."""
    Nq, _ = scalar.tabulate(geo)
    _, G = vector.tabulate(geo)
    local = np.einsum("tq,qk,tqac->tkac", geo.dx * weight, Nq, G, optimize=True)
    local = local.reshape(local.shape[0], scalar.nloc, -1)
    return _global(scalar, vector, local, geo)


def vector_scalar_matrix(vector: FunctionSpace, scalar: FunctionSpace, geo: Geometry, field):
    """``int p (v . g)`` for a vector field ``g`` at quadrature points; rows are vector tests."""
    Nv, _ = vector.tabulate(geo)
    Ns, _ = scalar.tabulate(geo)
    local = np.einsum("tq,qa,tqc,qk->tack", geo.dx, Nv, field, Ns, optimize=True)
    local = local.reshape(local.shape[0], -1, scalar.nloc)
    return _global(vector, scalar, local, geo)


def tangential_matrix(space: FunctionSpace, geo: Geometry, weight, tau):
    """``int w (u . tau)(v . tau)`` for a vector space."""
    N, _ = space.tabulate(geo)
    local = np.einsum(
        "tq,qa,qb,tqc,tqd->tacbd", geo.dx * weight, N, N, tau, tau, optimize=True
    )
    return _global(space, space, _interleave(local), geo)


def load_vector(space: FunctionSpace, geo: Geometry, values) -> np.ndarray:
    """``int f . v`` with ``values`` of shape (nt, nq) or (nt, nq, 2)."""
    N, _ = eval_basis(space.degree, geo.quad.points)
    if space.components == 1:
        local = np.einsum("tq,tq,qa->ta", geo.dx, values, N)
    else:
        local = np.einsum("tq,tqc,qa->tac", geo.dx, values, N)
    return np.bincount(geo.cell_dofs(space).ravel(), weights=local.ravel(), minlength=space.dim)


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    def __post_init__(self):
        n, m = self.matrix.shape
        if n != m or len(self.rhs) != n:
            raise ValueError(f"inconsistent system: matrix {self.matrix.shape}, rhs {len(self.rhs)}")


def _check_dirichlet(dofs, values):
    dofs = np.asarray(dofs, dtype=np.int64).ravel()
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    if len(dofs) == 0:
        return dofs, values
    order = np.argsort(dofs, kind="stable")
    d, v = dofs[order], values[order]
    same = d[1:] == d[:-1]
    if np.any(same & (v[1:] != v[:-1])):
        bad = d[1:][same & (v[1:] != v[:-1])][0]
        raise ValueError(f"conflicting Dirichlet values for dof {bad}")
    keep = np.concatenate([[True], ~same])
    return d[keep], v[keep]


def dirichlet_rows(matrix, dofs):
    """Replace rows ``dofs`` of ``matrix`` by identity rows."""
    n = matrix.shape[0]
    mask = np.ones(n)
    mask[dofs] = 0.0
    fixed = np.zeros(n)
    fixed[dofs] = 1.0
    return (sp.diags(mask) @ matrix + sp.diags(fixed)).tocsr()


def apply_dirichlet(system: SparseSystem, dofs, values) -> SparseSystem:
    """Row-replacement Dirichlet constraints; the rhs holds the prescribed values."""
    dofs, values = _check_dirichlet(dofs, values)
    if len(dofs) and (dofs.min() < 0 or dofs.max() >= len(system.rhs)):
        raise IndexError("Dirichlet dof out of range")
    rhs = system.rhs.copy()
    rhs[dofs] = values
    return SparseSystem(dirichlet_rows(system.matrix, dofs), rhs)


class DirectSolver:
    """Sparse LU factorization reused across right-hand sides."""

    def __init__(self, matrix):
        self.matrix = sp.csc_matrix(matrix)
        if not np.all(np.isfinite(self.matrix.data)):
            raise LinearSolveError("matrix has non-finite entries")
        try:
            self.lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise LinearSolveError(f"factorization failed: {exc}") from exc

    def solve(self, rhs, rel_tol: float = 1e-10, refinements: int = 3) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self.lu.solve(rhs)
        bnorm = np.linalg.norm(rhs)
        for _ in range(refinements + 1):
            r = rhs - self.matrix @ x
            res = np.linalg.norm(r)
            if res <= rel_tol * bnorm:
                return x
            x = x + self.lu.solve(r)
        res = np.linalg.norm(rhs - self.matrix @ x)
        if not np.isfinite(res) or res > rel_tol * bnorm:
            raise LinearSolveError(
                f"linear solve reached relative residual {res / max(bnorm, 1e-300):.3e}",
                residual=res,
            )
        return x


def solve_sparse(system: SparseSystem, rel_tol: float = 1e-10) -> np.ndarray:
    """Solve with sparse LU and verify ``||Ax - b|| <= rel_tol ||b||``."""
    return DirectSolver(system.matrix).solve(system.rhs, rel_tol)
