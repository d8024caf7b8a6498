"""Hankel functions and the free-space kernels of the 2D Helmholtz equation.

The public point-wise operations accept scalars or broadcastable arrays of
points with a trailing axis of length 2. The ``*_radial`` helpers work on
distances only and are what the assembly code calls in bulk.

Small-argument branches use the ascending series of J_0/Y_0 so that the
regular part ``Phi_k - Phi_0`` and its derivatives never suffer from the
cancellation of two logarithmically large numbers.
"""

import numpy as np
from scipy import special

EULER_GAMMA = float(np.euler_gamma)
COINCIDENT_TOL = 1e-14

# Below this value of k*r the regular part is summed from its series.
SERIES_CROSSOVER = 2.0
_NTERMS = 30


class CoincidentPointsError(ValueError):
    """Raised when a kernel is evaluated at (numerically) coincident points."""


def _check_arg(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise ValueError("Hankel argument must be finite and > 0")
    return z


def _maybe_scalar(v):
    return v[()] if isinstance(v, np.ndarray) and v.ndim == 0 else v


def hankel1_0(z):
    """H_0^(1)(z) for real z > 0."""
    return _maybe_scalar(special.hankel1(0, _check_arg(z)))


def hankel1_1(z):
    """H_1^(1)(z) for real z > 0."""
    return _maybe_scalar(special.hankel1(1, _check_arg(z)))


def _distance(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if d.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r < COINCIDENT_TOL):
        raise CoincidentPointsError("coincident source and target points")
    return d, r


def phi_0(x, y):
    """Laplace fundamental solution (1/2pi) ln(1/|x-y|)."""
    _, r = _distance(x, y)
    return _maybe_scalar(-np.log(r) / (2 * np.pi))


def phi_k(x, y, k):
    """Helmholtz fundamental solution (i/4) H_0^(1)(k|x-y|); k = 0 gives phi_0."""
    if k < 0:
        raise ValueError("wavenumber must be >= 0")
    if k == 0:
        return phi_0(x, y)
    _, r = _distance(x, y)
    return _maybe_scalar(0.25j * special.hankel1(0, k * r))


def phi_k_gradient(x, y, k, wrt="x"):
    """Gradient of phi_k with respect to ``x`` or ``y``; shape (..., 2)."""
    if k <= 0:
        raise ValueError("wavenumber must be > 0")
    d, r = _distance(x, y)
    dphi = -0.25j * k * special.hankel1(1, k * r)
    g = (dphi / r)[..., None] * d
    if wrt == "y":
        return -g
    if wrt != "x":
        raise ValueError("wrt must be 'x' or 'y'")
    return g


# --------------------------------------------------------------------------
# radial forms used by the assembly code
# --------------------------------------------------------------------------

def phi_radial(r, k):
    """Phi_k and its first two r-derivatives as functions of the distance."""
    z = k * r
    h0 = special.hankel1(0, z)
    h1 = special.hankel1(1, z)
    phi = 0.25j * h0
    phi_r = -0.25j * k * h1
    # H_1' = H_0 - H_1/z
    phi_rr = -0.25j * k * k * (h0 - h1 / z)
    return phi, phi_r, phi_rr


def _c_k(k):
    return 0.25j - (np.log(k / 2) + EULER_GAMMA) / (2 * np.pi)


def _series_terms(z):
    """e_m = (-1)^m (z/2)^(2m) / (m!)^2 for m = 0.._NTERMS-1, stacked on axis 0."""
    q = -(z / 2) ** 2
    terms = np.empty((_NTERMS,) + np.shape(z))
    terms[0] = 1.0
    for m in range(1, _NTERMS):
        terms[m] = terms[m - 1] * q / (m * m)
    return terms


_M = np.arange(_NTERMS, dtype=float)
_HARMONIC = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _NTERMS))])


def _regular_series(r, k):
    z = k * r
    e = _series_terms(z)
    shape = (-1,) + (1,) * np.ndim(z)
    m = _M.reshape(shape)
    hm = _HARMONIC.reshape(shape)
    rr = np.asarray(r, dtype=float)
    lg = np.log(rr)
    E = e[1:].sum(axis=0)
    d1 = (2 * m * e).sum(axis=0) / rr
    d2 = (2 * m * (2 * m - 1) * e).sum(axis=0) / rr**2
    H0 = (hm * e).sum(axis=0)
    H1 = (hm * 2 * m * e).sum(axis=0) / rr
    H2 = (hm * 2 * m * (2 * m - 1) * e).sum(axis=0) / rr**2
    ck = _c_k(k)
    inv2pi = 1 / (2 * np.pi)
    F = -inv2pi * lg * E + ck * (1 + E) + inv2pi * H0
    F_r = -inv2pi * (E / rr + lg * d1) + ck * d1 + inv2pi * H1
    F_rr = -inv2pi * (-E / rr**2 + 2 * d1 / rr + lg * d2) + ck * d2 + inv2pi * H2
    return F, F_r, F_rr


def regular_radial(r, k):
    """Phi_k - Phi_0 and its first two r-derivatives, cancellation-safe.

    At r = 0 the value and first derivative are returned as their limits
    (c_k and 0); the second derivative diverges like ln r there.
    """
    r = np.asarray(r, dtype=float)
    F = np.empty(r.shape, dtype=complex)
    F_r = np.empty(r.shape, dtype=complex)
    F_rr = np.empty(r.shape, dtype=complex)
    small = k * r < SERIES_CROSSOVER
    zero = r == 0
    big = ~small
    if np.any(big):
        phi, phi_r, phi_rr = phi_radial(r[big], k)
        rb = r[big]
        F[big] = phi + np.log(rb) / (2 * np.pi)
        F_r[big] = phi_r + 1 / (2 * np.pi * rb)
        F_rr[big] = phi_rr - 1 / (2 * np.pi * rb**2)
    sm = small & ~zero
    if np.any(sm):
        F[sm], F_r[sm], F_rr[sm] = _regular_series(r[sm], k)
    if np.any(zero):
        F[zero] = _c_k(k)
        F_r[zero] = 0.0
        F_rr[zero] = np.inf
    return F, F_r, F_rr


def regular_part(x, y, k, order=0):
    """Phi_k - Phi_0 (order 0), its x-gradient (order 1) or x-Hessian (order 2).

    Orders 0 and 1 extend continuously to x = y; order 2 grows like ln|x-y|
    and raises CoincidentPointsError at coincident points.
    """
    if k <= 0:
        raise ValueError("wavenumber must be > 0")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if order == 2 and np.any(r < COINCIDENT_TOL):
        raise CoincidentPointsError("Hessian of the regular part is unbounded at x = y")
    F, F_r, F_rr = regular_radial(r, k)
    if order == 0:
        return _maybe_scalar(F)
    rs = np.where(r > 0, r, 1.0)
    if order == 1:
        return np.where((r > 0)[..., None], (F_r / rs)[..., None] * d, 0.0)
    if order != 2:
        raise ValueError("order must be 0, 1 or 2")
    return radial_hessian(d, r, F_r, F_rr)


def radial_hessian(d, r, f_r, f_rr):
    """Hessian of a radial function f(|d|) given f' and f''; shape (..., 2, 2)."""
    rhat = d / r[..., None]
    outer = rhat[..., :, None] * rhat[..., None, :]
    eye = np.eye(2)
    return (f_rr[..., None, None] * outer
            + (f_r / r)[..., None, None] * (eye - outer))


def log_coefficient_radial(s, k):
    """a(s) = -(1/2pi) J_0(k sqrt(s)) and its first two s-derivatives.

    ``a`` multiplies ln r in Phi_k; every log-singular kernel coefficient in
    the boundary operators is built from (a, a', a'').
    """
    s = np.asarray(s, dtype=float)
    r = np.sqrt(s)
    z = k * r
    a = np.empty(s.shape)
    a1 = np.empty(s.shape)
    a2 = np.empty(s.shape)
    small = z < 4.0
    inv2pi = 1 / (2 * np.pi)
    if np.any(small):
        zs = z[small]
        q = -(k * k / 4)
        # series in s: e_m = q^m s^m/(m!)^2
        ss = s[small]
        e_over = np.empty((_NTERMS,) + ss.shape)  # e_m / s^m
        e_over[0] = 1.0
        for m in range(1, _NTERMS):
            e_over[m] = e_over[m - 1] * q / (m * m)
        pw = ss[None, :] ** np.maximum(_M[:, None] - 2, 0)
        a[small] = -inv2pi * special.j0(zs)
        a1[small] = -inv2pi * (_M[1:, None] * e_over[1:] * ss[None, :] ** (_M[1:, None] - 1)).sum(axis=0)
        a2[small] = -inv2pi * ((_M * (_M - 1))[2:, None] * e_over[2:] * pw[2:]).sum(axis=0)
    big = ~small
    if np.any(big):
        zb, rb = z[big], r[big]
        j0, j1 = special.j0(zb), special.j1(zb)
        a[big] = -inv2pi * j0
        a1[big] = k * j1 / (4 * np.pi * rb)
        a2[big] = k * (zb * j0 - 2 * j1) / (8 * np.pi * rb**3)
    return a, a1, a2


def free_space_radial(r, k):
    """Phi_k, Phi_k' and the regular-part derivatives F', F'' in one pass.

    Shares the Hankel evaluations between the full kernel and its regular
    part; the series branch is used for F where k r is small. ``r`` must be
    strictly positive.
    """
    shape = np.shape(r)
    r = np.asarray(r, dtype=float).reshape(-1)
    z = k * r
    h0 = special.hankel1(0, z)
    h1 = special.hankel1(1, z)
    phi = 0.25j * h0
    phi_r = -0.25j * k * h1
    f_r = phi_r + 1 / (2 * np.pi * r)
    f_rr = -0.25j * k * k * (h0 - h1 / z) - 1 / (2 * np.pi * r * r)
    small = z < SERIES_CROSSOVER
    if np.any(small):
        _, f_r[small], f_rr[small] = _regular_series(r[small], k)
    return tuple(v.reshape(shape) for v in (phi, phi_r, f_r, f_rr))
