import warnings

import numpy as np
import pytest

from roughwave.bie import (DegeneratePairWarning, assemble_block, assemble_M, assemble_T_difference,
                           dump_matrix, kernel_split, kernel_value, load_matrix, log_integral,
                           operator_kind, system_combinations)
from roughwave.model import MediumParams
from roughwave.solve import LinearSolver
from roughwave.specfun import phi_k_gradient
from roughwave.surface import make_mesh


@pytest.fixture(scope="module")
def flat_system(flat, fresnel_params):
    return assemble_M(make_mesh(flat, 10.0, 2.5, 400), fresnel_params)


def test_single_layer_log_coefficient(flat, fresnel_params):
    L, M = kernel_split(operator_kind("S", "plus", fresnel_params), flat, 0.0, 1e-6)
    # the coefficient is -J_0(k r) / (2 pi), within k^2 r^2 of -1/(2 pi)
    assert L == pytest.approx(-1 / (2 * np.pi), rel=1e-10)
    assert abs(M) <= 1.0


def test_double_layer_curvature_limit(bump):
    # free-space double-layer kernel grad_y Phi_k . (-n_y) near the apex, from specfun
    x1, d = 0.0, 1e-5
    x, y = bump.point(x1), bump.point(x1 + d)
    free = phi_k_gradient(x, y, 3.0, wrt="y") @ (-bump.normal(x1 + d))
    kappa = bump.curvature(x1)
    assert kappa < 0
    assert abs(free.real - (-abs(kappa) / (4 * np.pi))) <= 1e-3 * abs(kappa) / (4 * np.pi)


@pytest.mark.parametrize("tag", ["S", "K", "Kprime"])
def test_remainder_continuous_at_diagonal(bump, tag):
    op = operator_kind(tag, "plus", MediumParams.for_profile(bump, 3.0, 1.0, 2.0))
    L0, M0 = kernel_split(op, bump, 0.0, 0.0)
    vals = {}
    for d in (1e-3, 1e-5, 1e-7):
        L, vals[d] = kernel_split(op, bump, 0.0, d)
        assert abs(L - L0) <= d * d
    assert abs(vals[1e-5] - M0) <= 1e-6
    if tag == "S":
        # the S remainder carries k^2 r^2 ln r / (8 pi), about 2.5e-6 at r = 1e-3
        assert abs(vals[1e-5] - vals[1e-7]) <= 1e-6
        assert abs(vals[1e-3] - vals[1e-5]) <= 1e-5
    else:
        # at r = 1e-7 the normal offset (x - y) . n is below the rounding of f itself
        assert abs(vals[1e-3] - vals[1e-5]) <= 1e-6
        assert abs(vals[1e-5] - vals[1e-7]) <= 1e-4


def test_t_difference_is_log_bounded(flat, fresnel_params):
    kern = system_combinations(fresnel_params)[2]
    ratios = [abs(kernel_value(kern, flat, 0.0, d)) / abs(np.log(d)) for d in (1e-2, 1e-4, 1e-6)]
    assert max(ratios) < 1.0


def test_t_cancellation_for_equal_kernels(flat, fresnel_params):
    mesh = make_mesh(flat, 5.0, 1.25, 80)
    op = operator_kind("T", "plus", fresnel_params)
    assert np.max(np.abs(assemble_block([(1.0, op), (-1.0, op)], mesh))) <= 1e-12


def test_equal_wavenumbers_flagged(flat):
    mesh = make_mesh(flat, 5.0, 1.25, 40)
    with pytest.warns(DegeneratePairWarning):
        assemble_T_difference(mesh, MediumParams.for_profile(flat, 2.0, 2.0, 1.5))


def test_lone_hypersingular_block_rejected(flat, fresnel_params):
    with pytest.raises(ValueError):
        assemble_block(operator_kind("T", "plus", fresnel_params), make_mesh(flat, 5.0, 1.25, 40))


def test_unit_mu_shifts(flat):
    sm = assemble_M(make_mesh(flat, 5.0, 1.25, 40), MediumParams.for_profile(flat, 1.0, 2.0, 1.0))
    assert sm.shift_phi == 1.0 and sm.shift_psi == 1.0


def test_system_finite_and_well_conditioned(flat_system):
    assert flat_system.dim == 800
    assert np.all(np.isfinite(flat_system.matrix))
    cond = LinearSolver(flat_system).condition_estimate
    assert np.isfinite(cond) and cond < 1e6


def test_log_integral_exact():
    t = np.array([-1.5, 0.0, 0.7])
    from scipy import integrate
    for ti, got in zip(t, log_integral(t, 2.0)):
        ref = sum(integrate.quad(lambda s: np.log(abs(ti - s)), a, b)[0]
                  for a, b in ((-2.0, ti), (ti, 2.0)))
        assert got == pytest.approx(ref, rel=1e-12)


def test_matrix_dump_roundtrip(tmp_path, flat_system):
    path = tmp_path / "m.bin"
    dump_matrix(path, flat_system)
    raw = path.read_bytes()
    assert raw[:4] == b"BIEM" and len(raw) == 32 + 8 * flat_system.dim**2
    mat, kp, km, mu = load_matrix(path)
    assert (kp, km, mu) == (3.0, 1.0, 2.0)
    assert np.array_equal(mat, flat_system.matrix.astype(np.complex64))
