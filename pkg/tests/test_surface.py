import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from roughwave.surface import (gregory_corrections, make_mesh, make_profile, strip_heights,
                               taper_weights)


def test_flat_profile_is_constant():
    p = make_profile("flat")
    assert p.f(3.7) == 0 and p.df(3.7) == 0 and p.ddf(3.7) == 0


def test_gaussian_bump_values(bump):
    assert bump.f(0.0) == pytest.approx(0.3)
    assert bump.df(0.0) == 0
    assert abs(bump.f(50.0)) < 1e-300
    assert (bump.f_minus, bump.f_plus) == (0.0, 0.3)


def test_bump_derivatives_match_finite_differences(bump):
    x = np.linspace(-3, 3, 13)
    h = 1e-5
    assert np.allclose((bump.f(x + h) - bump.f(x - h)) / (2 * h), bump.df(x), atol=1e-9)
    assert np.allclose((bump.df(x + h) - bump.df(x - h)) / (2 * h), bump.ddf(x), atol=1e-9)


def test_damped_sine_bounded_by_amplitude():
    p = make_profile("damped_sine", h=0.2, period=2 * np.pi, decay=5.0)
    x = np.linspace(-40, 40, 10_000)
    assert np.max(np.abs(p.f(x))) <= 0.2
    assert p.f_minus <= p.f(x).min() and p.f_plus >= p.f(x).max()


@pytest.mark.parametrize("kind,params", [("gaussian_bump", {"h": np.inf}),
                                         ("gaussian_bump", {"h": 0.3, "sigma": 0.0}),
                                         ("nope", {})])
def test_invalid_profile_parameters(kind, params):
    with pytest.raises(ValueError):
        make_profile(kind, **params)


def test_custom_spline_from_csv(tmp_path):
    xs = np.linspace(-5, 5, 41)
    path = tmp_path / "profile.csv"
    path.write_text("x1,f\n" + "".join(f"{x:.17g},{0.1 * np.sin(x):.17g}\n" for x in xs))
    p = make_profile("custom_spline", path=str(path))
    assert np.allclose(p.f(xs), 0.1 * np.sin(xs), atol=1e-14)
    assert abs(p.f(0.3) - 0.1 * np.sin(0.3)) < 1e-3
    with pytest.raises(ValueError):
        make_profile("custom_spline", x=[0, 2, 1, 3], f=[0, 0, 0, 0])


def test_strip_heights():
    assert strip_heights(make_profile("flat"), 0.5) == (-0.5, 0.5)
    lo, hi = strip_heights(make_profile("gaussian_bump", h=0.3), 0.2)
    assert lo == pytest.approx(-0.2) and hi == pytest.approx(0.5)


def test_gregory_rule_exact_on_polynomials():
    # order-6 corrected trapezoid integrates polynomials of degree < 6 exactly
    t = np.linspace(0.0, 1.0, 41)
    h = t[1] - t[0]
    d = gregory_corrections(6)
    w = np.full(t.size, h)
    w[:6] += h * d
    w[-6:] += h * d[::-1]
    for p in range(6):
        assert w @ t**p == pytest.approx(1 / (p + 1), abs=1e-13)


def test_taper_window():
    x = np.array([0.0, 2.5, 9.999, 10.0, 12.0])
    w = taper_weights(x, 10.0, 2.5)
    assert w[0] == 1 and w[1] == 1 and w[3] == 0 and w[4] == 0
    assert 0 <= w[2] < 1e-6


def test_flat_mesh_weights_and_normals(flat):
    mesh = make_mesh(flat, 10.0, 2.5, 400)
    s = (mesh.weights * mesh.taper).sum()
    assert 2 * mesh.A_core <= s <= 2 * mesh.A
    assert np.array_equal(mesh.normals, np.tile([0.0, -1.0], (400, 1)))


def test_arclength_integral_matches_adaptive_oracle(bump):
    mesh = make_mesh(bump, 10.0, 2.5, 800)
    got = mesh.weights @ np.exp(-mesh.params**2)
    ref, _ = integrate.quad(lambda x: np.exp(-x * x) * np.hypot(1, bump.df(x)), -10, 10,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    assert abs(got - ref) / abs(ref) <= 1e-8


def test_mesh_errors(flat):
    with pytest.raises(ValueError):
        make_mesh(flat, 5.0, 5.0, 100)
    with pytest.raises(ValueError):
        make_mesh(flat, 5.0, 1.0, 8)


@settings(max_examples=25, deadline=None)
@given(h=st.floats(-0.5, 0.5), sigma=st.floats(0.3, 3.0), n=st.integers(16, 300))
def test_normals_unit_and_downward(h, sigma, n):
    mesh = make_mesh(make_profile("gaussian_bump", h=h, sigma=sigma), 6.0, 1.5, n)
    assert np.allclose(np.hypot(*mesh.normals.T), 1.0, atol=1e-14)
    assert np.all(mesh.normals[:, 1] < 0)
    tangent = np.stack([np.ones(n), mesh.profile.df(mesh.params)], axis=1)
    assert np.allclose((tangent * mesh.normals).sum(axis=1), 0.0, atol=1e-14)
