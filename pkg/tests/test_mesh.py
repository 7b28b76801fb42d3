import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffuse_biot.mesh import (
    BOUNDARY_TAGS,
    Rect,
    build_structured_mesh,
    composite_rule,
    gauss_segment,
    quadrature_rule,
)


def reference_monomial(a, b):
    """Exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_counts_and_area():
    rect = Rect(0.0, 1.0, -1.0, 1.0)
    m = build_structured_mesh(4, 8, rect)
    assert m.n_vertices == 5 * 9
    assert m.n_triangles == 2 * 4 * 8
    areas = m.signed_areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(rect.area, rel=1e-14)
    assert np.allclose(m.diameters(), math.hypot(0.25, 0.25))


def test_boundary_tags_lie_on_their_sides():
    rect = Rect(-1.0, 2.0, 0.5, 1.5)
    m = build_structured_mesh(3, 5, rect)
    want = {"bottom": (1, rect.y0), "top": (1, rect.y1), "left": (0, rect.x0), "right": (0, rect.x1)}
    for tag in BOUNDARY_TAGS:
        axis, value = want[tag]
        v = m.vertices[m.boundary_vertices(tag)]
        assert np.allclose(v[:, axis], value)
    assert sum(np.sum(m.boundary_tags == t) for t in BOUNDARY_TAGS) == 2 * (3 + 5)


def test_boundary_loop_is_counterclockwise():
    m = build_structured_mesh(2, 3, Rect(0, 1, 0, 1))
    e = m.boundary_edges
    # consecutive edges chain and the shoelace area is positive
    assert np.all(e[1:, 0] == e[:-1, 1]) and e[0, 0] == e[-1, 1]
    p = m.vertices[e[:, 0]]
    q = m.vertices[e[:, 1]]
    assert 0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]) == pytest.approx(1.0)


def test_edges_are_shared_by_at_most_two_triangles():
    m = build_structured_mesh(3, 3, Rect(0, 1, 0, 1))
    edges, tri_edges = m.edges()
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    # Euler: E = V + T - 1 for a disk
    assert len(edges) == m.n_vertices + m.n_triangles - 1
    assert set(counts) == {1, 2}
    assert np.sum(counts == 1) == len(m.boundary_edges)
    assert np.array_equal(m.edge_index(edges[::-1]), np.arange(len(edges))[::-1])
    with pytest.raises(KeyError):
        m.edge_index(np.array([[0, m.n_vertices - 1]]))


def test_bad_inputs():
    with pytest.raises(ValueError):
        Rect(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        build_structured_mesh(0, 2, Rect(0, 1, 0, 1))
    with pytest.raises(ValueError):
        quadrature_rule(3)


@pytest.mark.parametrize("degree", [1, 2, 4, 6])
def test_quadrature_exact_up_to_degree(degree):
    rule = quadrature_rule(degree)
    assert np.allclose(rule.points.sum(axis=1), 1.0)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    x, y = rule.xy.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = np.sum(rule.weights * x**a * y**b)
            assert got == pytest.approx(reference_monomial(a, b), rel=1e-13, abs=1e-16)


@pytest.mark.parametrize("levels", [0, 1, 2])
def test_composite_rule_keeps_exactness(levels):
    rule = composite_rule(quadrature_rule(4), levels)
    assert len(rule.weights) == 6 * 4**levels
    assert np.all(rule.points >= -1e-15)
    x, y = rule.xy.T
    for a in range(5):
        for b in range(5 - a):
            assert np.sum(rule.weights * x**a * y**b) == pytest.approx(reference_monomial(a, b), rel=1e-12)


def test_composite_rule_resolves_kinks():
    # |x - 1/3| has a kink; refinement must reduce the error
    # int_0^1 |x - 1/3| (1 - x) dx = 4/81 + 4/81
    exact = 8.0 / 81.0
    errs = []
    for levels in range(4):
        r = composite_rule(quadrature_rule(2), levels)
        errs.append(abs(np.sum(r.weights * np.abs(r.xy[:, 0] - 1 / 3)) - exact))
    assert errs[-1] < 0.05 * errs[0]


def test_gauss_segment():
    x, w = gauss_segment(4)
    assert w.sum() == pytest.approx(1.0)
    for k in range(8):
        assert np.sum(w * x**k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(-3, 3), st.floats(0.1, 4))
def test_structured_mesh_covers_any_rectangle(nx, ny, x0, w):
    rect = Rect(x0, x0 + w, -w, 2 * w)
    m = build_structured_mesh(nx, ny, rect)
    assert m.signed_areas().sum() == pytest.approx(rect.area, rel=1e-12)
    assert m.vertices[:, 0].min() == pytest.approx(rect.x0)
    assert m.vertices[:, 1].max() == pytest.approx(rect.y1)


def test_permuted_mesh_is_the_same_triangulation():
    m = build_structured_mesh(3, 2, Rect(0, 1, 0, 1))
    perm = np.random.default_rng(0).permutation(m.n_vertices)
    p = m.permuted(perm)
    assert np.allclose(p.vertices[perm], m.vertices)
    assert np.allclose(np.sort(p.signed_areas()), np.sort(m.signed_areas()))
