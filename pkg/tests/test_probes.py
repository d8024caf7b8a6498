import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import Delaunay

from roughwave.probes import (build_probe_domain, double_layer, half_disk_boundary, laplace_dipole,
                              laplace_kernel, p1_matrices)


def _signed_area(poly):
    x, y = poly.T
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def test_p1_matrices_on_unit_square():
    g = np.linspace(0, 1, 9)
    pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    tri = Delaunay(pts).simplices
    e1, e2 = pts[tri[:, 1]] - pts[tri[:, 0]], pts[tri[:, 2]] - pts[tri[:, 0]]
    area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    tri = np.where((area < 0)[:, None], tri[:, [0, 2, 1]], tri)
    K, M = p1_matrices(pts, tri)
    one = np.ones(len(pts))
    assert np.max(np.abs(K @ one)) <= 1e-12
    assert one @ M @ one == pytest.approx(1.0, abs=1e-14)
    u = 2 * pts[:, 0] - 3 * pts[:, 1]
    assert u @ K @ u == pytest.approx(13.0, rel=1e-12)
    assert pts[:, 0] @ M @ pts[:, 0] == pytest.approx(1 / 3, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(5, 40), rx=st.floats(0.3, 3.0), ry=st.floats(0.3, 3.0),
       cx=st.floats(-2, 2), cy=st.floats(-2, 2))
def test_double_layer_of_one_is_minus_one(n, rx, ry, cx, cy):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    poly = np.stack([cx + rx * np.cos(th), cy + ry * np.sin(th)], 1)
    assert _signed_area(poly) > 0
    inner = np.array([[cx, cy], [cx + 0.2 * rx, cy - 0.1 * ry]])
    outer = np.array([[cx + 2 * rx + 1, cy]])
    targets = np.concatenate([inner, poly, outer])
    dl = double_layer(poly, np.ones(n), targets)
    assert np.allclose(dl[:-1], -1.0, atol=1e-12)
    assert abs(dl[-1]) <= 1e-12


def test_double_layer_of_cosine_on_circle():
    # on the unit circle the double layer of cos(theta) is -x1 / 2 inside
    th = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    poly = np.stack([np.cos(th), np.sin(th)], 1)
    x = np.array([[0.1, 0.2], [-0.3, 0.4]])
    dl = double_layer(poly, poly[:, 0], x)
    assert np.allclose(dl, -x[:, 0] / 2, atol=1e-4)


def test_dipole_gradient_matches_finite_differences():
    y, e = np.array([0.1, 0.3]), np.array([0.6, 0.8])
    x = np.array([[0.5, -0.2], [-0.4, 0.1]])
    _, grad = laplace_dipole(x, y, e)
    h = 1e-6
    for k in range(2):
        step = np.zeros(2)
        step[k] = h
        fd = (laplace_dipole(x + step, y, e)[0] - laplace_dipole(x - step, y, e)[0]) / (2 * h)
        assert np.allclose(grad[:, k], fd, rtol=1e-7)
    # the dipole is the directional derivative of the Laplace kernel
    fd = (laplace_kernel(x + h * e, y) - laplace_kernel(x - h * e, y)) / (2 * h)
    assert np.allclose(laplace_dipole(x, y, e)[0], fd, rtol=1e-7)


def test_half_disk_boundary_orientation(bump):
    poly = half_disk_boundary(bump, 0.0, 0.2, 0.005)
    assert _signed_area(poly) > 0
    assert np.allclose(poly[0], bump.point(poly[0, 0]))
    r = np.hypot(*(poly - bump.point(0.0)).T)
    assert np.all(r <= 0.4 + 1e-12)
    assert np.allclose(double_layer(poly, np.ones(len(poly)), poly), -1.0, atol=1e-12)


def test_probe_domain_below_interface(bump):
    dom = build_probe_domain(bump, 0.0, 0.2, 0.2 / 16)
    assert np.all(dom.points[:, 1] < bump.f(dom.points[:, 0]))
    assert np.all(np.hypot(*(dom.points - dom.x0).T) <= 0.4 + 1e-12)
    assert _signed_area(dom.points[dom.boundary]) > 0
    area = _signed_area(dom.points[dom.boundary])
    assert dom.l2_norm(np.ones(dom.n)) ** 2 == pytest.approx(area, rel=1e-12)
    with pytest.raises(ValueError):
        build_probe_domain(bump, 0.0, 0.2, 0.3)
