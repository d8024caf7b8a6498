import numpy as np
import pytest
from scipy import special

from roughwave.model import MediumParams
from roughwave.solve import (HypersingularSource, PlaneWave, PointSource, SourceOnSurfaceError,
                             TooCloseError, admissibility_check, evaluate_field, evaluate_field_grid,
                             incident_field, incident_traces, solve_densities, solve_scattering)
from roughwave.bie import assemble_M
from roughwave.surface import make_mesh


@pytest.mark.parametrize("kp,km,mu,ok", [(3.0, 1.0, 2.0, True), (1.0, 2.0, 1.0, True),
                                         (2.0, 2.0, 1.0, False)])
def test_admissibility_examples(kp, km, mu, ok):
    adm = admissibility_check(MediumParams(kp, km, mu, -1.0, 1.0))
    assert bool(adm) is ok
    if not ok:
        assert "k_plus^2 = k_minus^2 * mu" in adm.reason


def test_admissibility_reasons_differ():
    sign = admissibility_check(MediumParams(1.0, 1.0, 2.0, -1.0, 1.0))
    equal = admissibility_check(MediumParams(2.0, 2.0, 1.0, -1.0, 1.0))
    assert not sign and not equal and sign.reason != equal.reason


@pytest.fixture(scope="module")
def flat_mesh(flat):
    return make_mesh(flat, 10.0, 2.5, 201)


def test_plane_wave_traces(flat_mesh):
    g1, g2 = incident_traces(PlaneWave((0.0, -1.0)), flat_mesh, 3.0)
    assert np.allclose(g1, -flat_mesh.taper, atol=1e-15)
    assert np.allclose(g2, -flat_mesh.taper * 3j, atol=1e-15)


def test_point_source_trace(flat_mesh):
    g1, _ = incident_traces(PointSource((0.0, 1.0)), flat_mesh, 3.0)
    i0 = np.argmin(np.abs(flat_mesh.params))
    assert flat_mesh.params[i0] == 0.0
    assert g1[i0] == pytest.approx(-0.25j * special.hankel1(0, 3.0), rel=1e-14)


def test_hypersingular_trace_matches_finite_differences(flat_mesh):
    y, e = np.array([0.3, 0.8]), np.array([0.6, -0.8])
    inc = HypersingularSource(tuple(y), tuple(e))
    _, g2 = incident_traces(inc, flat_mesh, 3.0)
    h = 1e-4
    for i in (60, 80, 100, 120, 140):
        x = flat_mesh.nodes[i]
        n = flat_mesh.normals[i]

        def u(p):
            # directional derivative of the point source in y-position form
            a = PointSource(tuple(y - h * e))
            b = PointSource(tuple(y + h * e))
            return (incident_field(a, p[None], 3.0)[0][0] - incident_field(b, p[None], 3.0)[0][0]) / (2 * h)

        dn = (u(x + h * n) - u(x - h * n)) / (2 * h)
        assert abs(-dn - g2[i]) <= 1e-5 * abs(g2[i])


def test_source_on_surface_rejected(flat_mesh):
    with pytest.raises(SourceOnSurfaceError):
        incident_traces(PointSource((0.0, 1e-8)), flat_mesh, 3.0)
    with pytest.raises(SourceOnSurfaceError):
        incident_traces(PointSource((0.0, -0.5)), flat_mesh, 3.0)


@pytest.fixture(scope="module")
def flat_solution(flat, fresnel_params):
    mesh = make_mesh(flat, 20.0, 5.0, 400)
    return solve_scattering(mesh, fresnel_params, PlaneWave((0.0, -1.0)))


def test_solve_diagnostics(flat_solution):
    d = flat_solution.diagnostics
    assert d["residual"] <= 1e-10 and d["admissible"] and np.isfinite(d["condition_estimate"])


def test_zero_and_scaled_rhs(flat_solution, fresnel_params):
    system = assemble_M(flat_solution.mesh, fresnel_params)
    g1, g2 = incident_traces(flat_solution.incident, flat_solution.mesh, 3.0)
    zero, _ = solve_densities(system, (0 * g1, 0 * g2))
    assert np.max(np.abs(zero.stacked)) <= 1e-14
    one, _ = solve_densities(system, (g1, g2))
    two, _ = solve_densities(system, (2 * g1, 2 * g2))
    assert np.linalg.norm(two.stacked - 2 * one.stacked) <= 1e-12 * np.linalg.norm(one.stacked)
    gm, diag = solve_densities(system, (g1, g2), method="gmres")
    assert np.linalg.norm(gm.stacked - one.stacked) <= 1e-8 * np.linalg.norm(one.stacked)


def test_symmetric_points_agree(flat_solution):
    for x2 in (0.5, -0.5):
        a, ra = evaluate_field(flat_solution, (-0.7, x2))
        b, rb = evaluate_field(flat_solution, (0.7, x2))
        assert ra == rb
        assert abs(a - b) <= 1e-10 * abs(a)


def test_too_close_rejected(flat_solution):
    with pytest.raises(TooCloseError):
        evaluate_field(flat_solution, (0.0, 0.01 * flat_solution.mesh.h))


def test_single_point_grid_matches_pointwise(flat_solution):
    table = evaluate_field_grid(flat_solution, (0.3, 0.3), (0.8, 0.8), 1, 1)
    u, _ = evaluate_field(flat_solution, (0.3, 0.8))
    assert not table.masked[0] and table.u[0] == pytest.approx(u, rel=1e-14)


def test_grid_mask_fraction(flat_solution):
    n = 41
    table = evaluate_field_grid(flat_solution, (-1.0, 1.0), (-1.0, 1.0), 5, n, tube=0.2)
    cell = 2.0 / (n - 1)
    assert abs(table.masked_fraction - 0.4 / 2.0) <= cell / 2.0 + 1e-12
    assert np.all(np.isnan(table.u[table.masked]))


def test_point_source_field_does_not_grow_upward(bump):
    params = MediumParams.for_profile(bump, 3.0, 1.0, 2.0)
    sol = solve_scattering(make_mesh(bump, 12.0, 3.0, 300), params, PointSource((0.0, 1.0)))
    vals = [abs(evaluate_field(sol, (0.0, x2))[0]) for x2 in (2.0, 4.0, 8.0)]
    assert vals[2] <= vals[1] <= vals[0]
