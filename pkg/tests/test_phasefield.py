import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffuse_biot.mesh import Rect, build_structured_mesh
from diffuse_biot.phasefield import (
    InterfaceGeometry,
    PhaseField,
    WeightFamily,
    eval_grad_phi,
    eval_phi,
    frame_tolerance,
    layer_cells,
    layer_measure,
    normal_tangent_frame,
    shape_S,
    shape_S_prime,
)

GEOMETRIES = [
    InterfaceGeometry("horizontal_line", y_gamma=0.1),
    InterfaceGeometry("circle_level_set", radius=0.5, center=(0.2, -0.1)),
    InterfaceGeometry("channel_band", radius=0.3, center=(0.5, 0.05)),
]
FAMILIES = [WeightFamily("power", 0.9), WeightFamily("power", 0.5), WeightFamily("tanh")]


def test_shape_S_closed_form():
    b = 0.9
    assert shape_S(0.5, b) == pytest.approx(1 - 0.5**b)
    assert shape_S(-0.5, b) == pytest.approx(0.5**b - 1)
    assert shape_S(0.0, b) == 0.0
    assert shape_S(2.0, b) == 1.0 and shape_S(-1.0, b) == -1.0 and shape_S(1.0, b) == 1.0
    t = np.linspace(-1.5, 1.5, 31)
    assert np.allclose(shape_S(t, b), -shape_S(-t, b))


def test_shape_S_prime_matches_difference_quotient():
    b = 0.7
    t = np.array([-0.9, -0.5, -0.1, 0.2, 0.6, 0.95])
    h = 1e-6
    fd = (shape_S(t + h, b) - shape_S(t - h, b)) / (2 * h)
    assert np.allclose(shape_S_prime(t, b), fd, rtol=1e-6)
    assert np.all(shape_S_prime(np.array([-2.0, 1.0, 3.0]), b) == 0.0)


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from(GEOMETRIES),
    st.sampled_from(FAMILIES),
    st.floats(0.01, 0.5),
    st.floats(0.0, 0.5),
    st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=20),
)
def test_weights_partition_and_bounds(geom, fam, eps, delta, pts):
    pf = PhaseField(geom, fam, eps, delta)
    x = np.array(pts)
    F, B = eval_phi(pf, x)
    assert np.array_equal(F + B, np.ones(len(x)))
    assert np.all(F >= delta - 1e-15) and np.all(F <= 1 - delta + 1e-15)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(FAMILIES), st.floats(0.01, 0.5), st.floats(0.0, 0.49))
def test_fluid_weight_nondecreasing_in_distance(fam, eps, delta):
    pf = PhaseField(InterfaceGeometry("horizontal_line"), fam, eps, delta)
    y = np.linspace(-1, 1, 401)
    F, _ = eval_phi(pf, np.column_stack([0 * y, y]))
    assert np.all(np.diff(F) >= 0)


@pytest.mark.parametrize("geom", GEOMETRIES)
@pytest.mark.parametrize("fam", FAMILIES)
def test_gradient_matches_finite_differences(geom, fam):
    pf = PhaseField(geom, fam, 0.3, 1e-3)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (200, 2))
    a = geom.argument(x) / pf.epsilon
    # keep away from the non-smooth points of the power family
    if fam.kind == "power":
        x = x[(np.abs(np.abs(a) - 1) > 0.05) & (np.abs(a) > 0.05)]
    h = 1e-6
    g = eval_grad_phi(pf, x)
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (eval_phi(pf, x + e)[0] - eval_phi(pf, x - e)[0]) / (2 * h)
        assert np.allclose(g[:, d], fd, rtol=1e-5, atol=1e-7)


def test_signed_distance_and_level_set_arguments():
    x = np.array([[0.3, 0.7], [0.0, -0.2]])
    assert np.allclose(InterfaceGeometry("horizontal_line", y_gamma=0.2).argument(x), [0.5, -0.4])
    circ = InterfaceGeometry("circle_level_set", radius=0.5)
    assert np.allclose(circ.argument(x), -(np.sum(x**2, axis=1) - 0.25))


def test_normal_and_tangent_frame():
    g = np.array([[0.0, 2.0], [3.0, 4.0], [0.0, 0.0]])
    n, tau, degenerate = normal_tangent_frame(g, tol=1e-12)
    assert np.allclose(n[0], [0, -1])
    assert np.allclose(n[1], [-0.6, -0.8])
    assert np.allclose(np.sum(n[:2] * tau[:2], axis=1), 0)
    assert np.allclose(np.linalg.norm(tau[:2], axis=1), 1)
    # tau is n rotated by +90 degrees
    assert np.allclose(n[:2, 0] * tau[:2, 1] - n[:2, 1] * tau[:2, 0], 1)
    assert degenerate.tolist() == [False, False, True]
    assert np.all(n[2] == 0) and np.all(tau[2] == 0)


def test_diffuse_normal_points_out_of_the_fluid():
    pf = PhaseField(InterfaceGeometry("horizontal_line"), WeightFamily("tanh"), 0.1)
    n, _, _ = normal_tangent_frame(eval_grad_phi(pf, np.array([[0.5, 0.01]])), frame_tolerance(pf))
    assert np.allclose(n, [[0, -1]])


def test_validation():
    with pytest.raises(ValueError):
        WeightFamily("power", 1.5)
    with pytest.raises(ValueError):
        WeightFamily("power", 0.0)
    with pytest.raises(ValueError):
        WeightFamily("gauss")
    with pytest.raises(ValueError):
        InterfaceGeometry("ellipse")
    with pytest.raises(ValueError):
        InterfaceGeometry("circle_level_set", radius=-1)
    geom = InterfaceGeometry()
    with pytest.raises(ValueError):
        PhaseField(geom, WeightFamily(), 0.0)
    with pytest.raises(ValueError):
        PhaseField(geom, WeightFamily(), 0.1, delta=0.6)
    # delta = 1/2 is the degenerate limit with both weights equal to 1/2
    F, B = PhaseField(geom, WeightFamily(), 0.1, delta=0.5).phi(np.array([[0.0, 0.3]]))
    assert F == pytest.approx(0.5) and B == pytest.approx(0.5)


@pytest.mark.parametrize("threshold", [0.01, 0.05, 0.2])
@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_layer_measure_against_closed_form(threshold, eps):
    # strip (0,1) x (-1,1), interface y = 0; measure = 2 eps * t* with
    # t* = 1 - (2 thr)^(1/beta) for the power family, artanh(1 - 2 thr) for tanh
    mesh = build_structured_mesh(2, 800, Rect(0, 1, -1, 1))
    beta = 0.9
    power = PhaseField(InterfaceGeometry(), WeightFamily("power", beta), eps)
    exact = 2 * eps * (1 - (2 * threshold) ** (1 / beta))
    assert layer_measure(power, mesh, threshold) == pytest.approx(exact, rel=1e-2)
    tanh = PhaseField(InterfaceGeometry(), WeightFamily("tanh"), eps)
    exact = 2 * eps * np.arctanh(1 - 2 * threshold)
    assert layer_measure(tanh, mesh, threshold) == pytest.approx(exact, rel=1e-2)


def test_layer_measure_rejects_bad_threshold():
    mesh = build_structured_mesh(2, 2, Rect(0, 1, -1, 1))
    pf = PhaseField(InterfaceGeometry(), WeightFamily("power"), 0.1)
    for thr in (0.0, 0.5, -1.0):
        with pytest.raises(ValueError):
            layer_measure(pf, mesh, thr)


def test_layer_cells_cover_the_transition():
    mesh = build_structured_mesh(10, 20, Rect(0, 1, -1, 1))
    pf = PhaseField(InterfaceGeometry(), WeightFamily("power"), 0.1)
    mask = layer_cells(mesh, pf)
    y = mesh.vertices[mesh.triangles][..., 1]
    assert np.array_equal(mask, (y.min(axis=1) < 0.1) & (y.max(axis=1) > -0.1))
