"""Structured triangulations of rectangles and reference-triangle quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TAGS = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``(x0, x1) x (y0, y1)``."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(eq=False)
class Mesh:
    """Triangulation with tagged boundary edges.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    boundary_edges : (nb, 2) int array of vertex pairs
    boundary_tags : (nb,) array of tag strings
    rect : Rect or None
        The rectangle the mesh was built on, when known.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    rect: Rect | None = None
    _edges: tuple | None = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        """Longest edge length of every triangle."""
        p = self.vertices[self.triangles]
        lengths = np.stack(
            [np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)],
            axis=1,
        )
        return lengths.max(axis=1)

    def edges(self):
        """Unique undirected edges and the triangle-to-edge map.

        Returns ``(edges, tri_edges)`` where ``edges`` is ``(ne, 2)`` with
        sorted vertex pairs in lexicographic order and ``tri_edges[t, k]`` is
        the edge opposite local vertex ``k`` of triangle ``t``.
        """
        if self._edges is None:
            t = self.triangles
            local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
            flat = np.sort(local.reshape(-1, 2), axis=1)
            edges, inverse = np.unique(flat, axis=0, return_inverse=True)
            self._edges = (edges, inverse.reshape(-1, 3))
        return self._edges

    def boundary_vertices(self, tag: str) -> np.ndarray:
        sel = self.boundary_edges[self.boundary_tags == tag]
        return np.unique(sel)

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        """Global edge index of each vertex pair in ``pairs``."""
        edges, _ = self.edges()
        key = np.sort(np.asarray(pairs), axis=1)
        n = self.n_vertices
        codes = edges[:, 0].astype(np.int64) * n + edges[:, 1]
        want = key[:, 0].astype(np.int64) * n + key[:, 1]
        pos = np.searchsorted(codes, want)
        if np.any(pos >= len(codes)) or np.any(codes[pos] != want):
            raise KeyError("vertex pair is not a mesh edge")
        return pos

    def permuted(self, perm: np.ndarray) -> "Mesh":
        """Same triangulation with vertex ``i`` renumbered to ``perm[i]``."""
        perm = np.asarray(perm)
        verts = np.empty_like(self.vertices)
        verts[perm] = self.vertices
        return Mesh(
            verts,
            perm[self.triangles],
            perm[self.boundary_edges],
            self.boundary_tags.copy(),
            self.rect,
        )


def build_structured_mesh(nx: int, ny: int, rect: Rect) -> Mesh:
    """Split an ``nx`` by ``ny`` grid of cells into ``2 nx ny`` triangles.

    Vertices are numbered row-major (x fastest). Each cell is cut along the
    diagonal from its lower-left to its upper-right corner; the lower-right
    triangle comes first.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"need nx >= 1 and ny >= 1, got nx={nx}, ny={ny}")
    xs = np.linspace(rect.x0, rect.x1, nx + 1)
    ys = np.linspace(rect.y0, rect.y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ll = (j * (nx + 1) + i).ravel()
    lr = ll + 1
    ul = ll + nx + 1
    ur = ul + 1
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([ll, lr, ur])
    tris[1::2] = np.column_stack([ll, ur, ul])

    def run(idx):
        idx = np.asarray(idx)
        return np.column_stack([idx[:-1], idx[1:]])

    row0 = np.arange(nx + 1)
    bottom = run(row0)
    top = run(row0 + ny * (nx + 1))[::-1, ::-1]
    col0 = np.arange(ny + 1) * (nx + 1)
    right = run(col0 + nx)
    left = run(col0)[::-1, ::-1]
    # counterclockwise loop: bottom -> right -> top -> left
    edges = np.vstack([bottom, right, top, left])
    tags = np.array(
        ["bottom"] * nx + ["right"] * ny + ["top"] * nx + ["left"] * ny, dtype=object
    )
    return Mesh(vertices, tris, edges, tags, rect)


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle with vertices (0,0), (1,0), (0,1).

    ``points`` holds barycentric coordinates ``(l0, l1, l2)``; the reference
    coordinates are ``(x, y) = (l1, l2)``. Weights sum to 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]


def _orbit_s2(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit_s3(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _rule(orbits):
    pts, wts = [], []
    for orbit, w in orbits:
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    return np.array(pts), np.array(wts)


_RULES = {
    1: _rule([([(1 / 3, 1 / 3, 1 / 3)], 0.5)]),
    2: _rule([(_orbit_s2(1 / 6), 1 / 6)]),
    # Dunavant rules, points refined to double precision
    4: _rule(
        [
            (_orbit_s2(0.44594849091596484678), 0.11169079483900565948),
            (_orbit_s2(0.091576213509770838221), 0.054975871827661005353),
        ]
    ),
    6: _rule(
        [
            (_orbit_s2(0.24928674517090372518), 0.058393137863195089105),
            (_orbit_s2(0.063089014491503451313), 0.025422453185104304278),
            (
                _orbit_s3(0.053145049844812568291, 0.31035245103378925661),
                0.041425537809183635719,
            ),
        ]
    ),
}


def quadrature_rule(degree: int) -> QuadratureRule:
    """Symmetric triangle rule exact for polynomials of total degree ``degree``."""
    if degree not in _RULES:
        raise ValueError(f"unsupported quadrature degree {degree}; use one of {sorted(_RULES)}")
    pts, wts = _RULES[degree]
    return QuadratureRule(pts.copy(), wts.copy(), degree)


def gauss_segment(n: int = 3):
    """Gauss-Legendre rule on [0, 1] as ``(points, weights)``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_rule(rule: QuadratureRule, levels: int) -> QuadratureRule:
    """Copy ``rule`` onto the ``4**levels`` sub-triangles of a uniform refinement.

    Exactness degree is unchanged but the rule resolves non-smooth
    integrands (steep or singular weights) much better.
    """
    if levels < 0:
        raise ValueError("levels must be nonnegative")
    # sub-triangles as barycentric vertex triples
    tris = [np.eye(3)]
    for _ in range(levels):
        nxt = []
        for v in tris:
            m01, m12, m20 = 0.5 * (v[0] + v[1]), 0.5 * (v[1] + v[2]), 0.5 * (v[2] + v[0])
            corners = ((v[0], m01, m20), (m01, v[1], m12), (m20, m12, v[2]), (m12, m20, m01))
            nxt += [np.array(c) for c in corners]
        tris = nxt
    pts = np.concatenate([rule.points @ v for v in tris])
    wts = np.tile(rule.weights, len(tris)) / len(tris)
    return QuadratureRule(pts, wts, rule.degree)
