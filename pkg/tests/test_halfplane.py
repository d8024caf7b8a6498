import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughwave.halfplane import (HalfPlaneSpec, SideError, dirichlet_green, image_kernel, image_point,
                                 impedance_green, pk_correction, q_adaptive, q_fixed, q_table)


@pytest.mark.parametrize("side", ["upper", "lower"])
def test_dirichlet_vanishes_on_line(side, rng):
    spec = HalfPlaneSpec(side, 0.5, 2.0)
    for _ in range(20):
        x = np.array([rng.uniform(-5, 5), 0.5])
        y = np.array([rng.uniform(-5, 5), 0.5 + spec.sign * rng.uniform(0.1, 3)])
        assert abs(dirichlet_green(spec, x, y)) <= 1e-13


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 4), st.floats(-5, 5), st.floats(0.05, 4))
def test_dirichlet_symmetric(x1, x2, y1, y2):
    spec = HalfPlaneSpec("upper", 0.0, 1.5)
    x, y = np.array([x1, x2]), np.array([y1, y2])
    if np.hypot(x1 - y1, x2 - y2) < 1e-3:
        return
    assert abs(dirichlet_green(spec, x, y) - dirichlet_green(spec, y, x)) <= 1e-12


@pytest.mark.parametrize("side", ["upper", "lower"])
def test_impedance_condition_on_line(side, rng):
    k, a = 2.0, -0.3
    spec = HalfPlaneSpec(side, a, k)
    for _ in range(5):
        x = np.array([rng.uniform(-3, 3), a])
        y = np.array([rng.uniform(-3, 3), a + spec.sign * rng.uniform(0.2, 2)])
        G = impedance_green(spec, x, y)
        dG = impedance_green(spec, x, y, order=1)
        assert abs(dG[1] + spec.sign * 1j * k * G) <= 1e-8 * k * abs(G)


def test_side_checks():
    spec = HalfPlaneSpec("upper", 0.0, 1.0)
    with pytest.raises(SideError):
        dirichlet_green(spec, np.array([0.0, -1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        HalfPlaneSpec("sideways", 0.0, 1.0)
    assert np.allclose(image_point(np.array([1.0, 3.0]), 1.0), [1.0, -1.0])


def test_pk_continuous_at_origin():
    spec = HalfPlaneSpec("upper", 0.0, 1.0)
    vals = [pk_correction(spec, np.array([0.6, 0.8]) * t) for t in (1e-2, 1e-3, 1e-4)]
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < d1


def test_q_adaptive_self_consistent(rng):
    for _ in range(5):
        r, u = rng.uniform(0.05, 20), rng.uniform(0, 1)
        assert abs(q_adaptive(r, u, tol=1e-12) - q_adaptive(r, u, tol=1e-13, budget=200_000)) <= 1e-10


def test_q_rules_agree(rng):
    r = np.exp(rng.uniform(np.log(0.02), np.log(50), 30))
    u = rng.uniform(0, 1, 30)
    ref = np.array([q_adaptive(a, b, tol=1e-13, budget=200_000) for a, b in zip(r, u)])
    assert np.abs(q_fixed(r, u)[0] - ref).max() <= 1e-10 * np.abs(ref).max()
    assert np.abs(q_table(r, u)[0] - ref).max() <= 1e-9 * np.abs(ref).max()


def test_image_kernel_derivatives():
    z = np.array([[0.4, 0.7], [-1.3, 0.2], [2.0, 1.5]])
    k, h = 1.7, 1e-5
    R, grad, hess = image_kernel(z, k, 1.0)
    for i, e in enumerate(np.eye(2)):
        Rp, gp, _ = image_kernel(z + h * e, k, 1.0)
        Rm, gm, _ = image_kernel(z - h * e, k, 1.0)
        assert np.allclose((Rp - Rm) / (2 * h), grad[:, i], rtol=1e-6, atol=1e-9)
        assert np.allclose((gp - gm) / (2 * h), hess[:, :, i], rtol=1e-5, atol=1e-8)
