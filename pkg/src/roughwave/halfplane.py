"""Dirichlet and impedance Green's functions of the Helmholtz operator in a half plane.

The impedance Green's function carries a smooth correction P(z) given by a
Laplace-type integral. Writing r = k|z| and u = +-z_2/|z| (sign by side),

    P(z) = exp(i r) / pi * Q(r, u),
    Q(r, u) = int_0^inf t^{-1/2} e^{-r t} (1 + u (1 + i t)) / (sqrt(t - 2i) (t - i(1+u))^2) dt,

so Q depends neither on k nor on the side. Two independent evaluation routes
are provided: an adaptive panel rule (``pk_correction``, used for point
evaluations and as the reference) and a Chebyshev table in (log r, u) built
once per process from a fixed composite Gauss rule (``image_kernel``, used by
the bulk assembly, with analytic derivatives).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C

from .specfun import CoincidentPointsError, phi_k, phi_k_gradient, phi_radial

SIDES = ("upper", "lower")


class QuadratureError(RuntimeError):
    """The adaptive rule for the correction integral exhausted its budget."""


class SideError(ValueError):
    """A point lies outside the half plane it was declared to belong to."""


@dataclass(frozen=True)
class HalfPlaneSpec:
    """Half plane {x_2 > a} (``upper``) or {x_2 < a} (``lower``) and wavenumber k."""

    side: str
    a: float
    k: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError("wavenumber must be finite and > 0")
        if not np.isfinite(self.a):
            raise ValueError("strip height must be finite")

    @property
    def sign(self):
        return 1.0 if self.side == "upper" else -1.0


@dataclass(frozen=True)
class ImagePoint:
    source: tuple
    reflected: tuple


def image_point(y, a):
    """Reflection of y across the line x_2 = a."""
    y = np.asarray(y, dtype=float)
    refl = y.copy()
    refl[..., 1] = 2 * a - y[..., 1]
    return refl


def _check_inside(spec, pts, name, closed=False):
    h = spec.sign * (np.asarray(pts, dtype=float)[..., 1] - spec.a)
    bad = h < 0 if closed else h <= 0
    if np.any(bad):
        rel = ">" if spec.sign > 0 else "<"
        raise SideError(f"{name} is not inside the {spec.side} half plane x2 {rel} {spec.a}")


def dirichlet_green(spec, x, y):
    """Phi_k(x, y) - Phi_k(x, y'); vanishes for x on the line x_2 = a."""
    _check_inside(spec, x, "x", closed=True)
    _check_inside(spec, y, "y")
    return phi_k(x, y, spec.k) - phi_k(x, image_point(y, spec.a), spec.k)


# --------------------------------------------------------------------------
# integrand of Q in the variable s = sqrt(t)
# --------------------------------------------------------------------------

def _integrand(s, r, u):
    """2 t^{-1/2} dt/ds times the Q integrand, i.e. the integrand in s."""
    t = s * s
    a = 1 + u * (1 + 1j * t)
    d = t - 1j * (1 + u)
    return 2 * np.exp(-r * t) * a / (np.sqrt(t - 2j) * d * d)


_GL20 = np.polynomial.legendre.leggauss(20)
_GL10 = np.polynomial.legendre.leggauss(10)


def _panel_rule(f, lo, hi, rule):
    x, w = rule
    mid, half = (hi + lo) / 2, (hi - lo) / 2
    return half * np.dot(w, f(mid + half * x))


def _truncation_point(f, tol=1e-14):
    """First s where |f(s)| s drops below tol times the peak of |f|."""
    s = np.concatenate([np.linspace(0, 1.5, 13), 1.5 * 1.25 ** np.arange(1, 200)])
    vals = np.abs(f(s))
    peak = vals.max()
    small = np.nonzero((vals * s < tol * peak) & (s > 1.5))[0]
    if len(small) == 0:
        raise QuadratureError("correction integrand does not decay")
    return s[small[0]]


def q_adaptive(r, u, tol=1e-12, budget=100_000):
    """Q(r, u) by adaptive 10/20-point Gauss-Legendre panel bisection in s."""
    f = lambda s: _integrand(s, r, u)
    s_max = _truncation_point(f)
    edges = np.concatenate([np.arange(0, 1.5, 0.25), 1.5 * 1.25 ** np.arange(0, 200)])
    edges = np.unique(np.append(edges[edges < s_max], s_max))
    stack = list(zip(edges[:-1], edges[1:]))
    total = 0.0 + 0.0j
    evals = 0
    while stack:
        lo, hi = stack.pop()
        fine = _panel_rule(f, lo, hi, _GL20)
        coarse = _panel_rule(f, lo, hi, _GL10)
        evals += 30
        if evals > budget:
            raise QuadratureError(f"budget of {budget} integrand evaluations exceeded")
        if abs(fine - coarse) <= tol * (hi - lo) / s_max or hi - lo < 1e-12:
            total += fine
        else:
            mid = (lo + hi) / 2
            stack.extend([(lo, mid), (mid, hi)])
    return total


def _z_to_ru(spec, z):
    z = np.asarray(z, dtype=float)
    rho = np.hypot(z[..., 0], z[..., 1])
    if np.any(rho == 0):
        raise ValueError("correction term needs |z| > 0")
    return spec.k * rho, spec.sign * z[..., 1] / rho, rho


def pk_correction(spec, z, tol=1e-12, budget=100_000):
    """Correction P(z) of the impedance Green's function, z = x - y'.

    z must lie in the closed half plane through the origin on ``spec.side``.
    """
    z = np.asarray(z, dtype=float)
    r, u, rho = _z_to_ru(spec, z)
    if u < -1e-12:
        raise SideError("z is not in the closed half plane of the given side")
    return np.exp(1j * r) / np.pi * q_adaptive(r, max(u, 0.0), tol, budget)


def impedance_green(spec, x, y, order=0, wrt="x"):
    """Phi_k(x, y) + Phi_k(x, y') + P(x - y') or its gradient in x or y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inside(spec, x, "x", closed=True)
    _check_inside(spec, y, "y")
    yr = image_point(y, spec.a)
    z = x - yr
    k = spec.k
    if order == 0:
        return phi_k(x, y, k) + phi_k(x, yr, k) + pk_correction(spec, z)
    if order != 1:
        raise ValueError("order must be 0 or 1")
    # P is evaluated slightly across Gamma_a by the FD stencil; it extends analytically
    gz = phi_k_gradient(x, yr, k) + _pk_fd_gradient_signed(spec, z)
    if wrt == "x":
        return phi_k_gradient(x, y, k) + gz
    if wrt == "y":
        return phi_k_gradient(x, y, k, wrt="y") + np.array([-gz[0], gz[1]])
    raise ValueError("wrt must be 'x' or 'y'")


def _pk_signed(spec, z):
    # P continued analytically to u slightly below 0 (needed by FD stencils on Gamma_a)
    r, u, _ = _z_to_ru(spec, z)
    return np.exp(1j * r) / np.pi * q_adaptive(r, u)


def _pk_fd_gradient_signed(spec, z):
    z = np.asarray(z, dtype=float)
    h = 1e-5 * max(1.0, np.hypot(*z))
    grad = np.empty(2, dtype=complex)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        p = [_pk_signed(spec, z + m * e) for m in (-2, -1, 1, 2)]
        grad[i] = (p[0] - 8 * p[1] + 8 * p[2] - p[3]) / (12 * h)
    return grad


# --------------------------------------------------------------------------
# bulk evaluation: Chebyshev table in (log r, u) with analytic derivatives
# --------------------------------------------------------------------------

TABLE_R_MIN = 1e-2
TABLE_R_MAX = 1e5
_XI_EDGES = np.linspace(np.log(TABLE_R_MIN), np.log(TABLE_R_MAX), 15)
_NXI = 25
_NU = 21


def _fixed_nodes(x_max=61.0):
    edges = np.concatenate([np.arange(0, 1.5, 0.25), 1.5 * 1.25 ** np.arange(0, 200)])
    edges = np.append(edges[edges < x_max], x_max)
    x, w = _GL20
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = ((hi + lo) / 2 + (hi - lo) / 2 * x).ravel()
    weights = ((hi - lo) / 2 * w).ravel()
    return nodes, weights


def q_fixed(r, u, derivs=False):
    """Q (and optionally Q_r, Q_u, Q_rr, Q_ru, Q_uu) by a fixed composite Gauss rule.

    ``r`` and ``u`` are 1D arrays of equal length. Accurate to ~1e-13 for
    r >= 1e-2; smaller r extends the rule to keep the e^{-r t} cutoff.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty((6 if derivs else 1, r.size), dtype=complex)
    groups = {}
    for i, ri in enumerate(r):
        xm = 61.0 if ri >= TABLE_R_MIN else max(61.0, np.sqrt(40 / ri))
        groups.setdefault(xm, []).append(i)
    for xm, idx in groups.items():
        idx = np.array(idx)
        xn, wn = _fixed_nodes(xm)
        for chunk in np.array_split(idx, max(1, len(idx) // 512)):
            rc, uc = r[chunk, None], u[chunk, None]
            sig = np.minimum(1.0, 1 / np.sqrt(rc))
            s = sig * xn
            w = 2 * sig * wn
            t = s * s
            g = w * np.exp(-rc * t) / np.sqrt(t - 2j)
            a = 1 + uc * (1 + 1j * t)
            au = 1 + 1j * t
            d = t - 1j * (1 + uc)
            n0 = a / d**2
            out[0, chunk] = (g * n0).sum(axis=1)
            if derivs:
                nu = au / d**2 + 2j * a / d**3
                nuu = 4j * au / d**3 - 6 * a / d**4
                out[1, chunk] = -(g * t * n0).sum(axis=1)
                out[2, chunk] = (g * nu).sum(axis=1)
                out[3, chunk] = (g * t * t * n0).sum(axis=1)
                out[4, chunk] = -(g * t * nu).sum(axis=1)
                out[5, chunk] = (g * nuu).sum(axis=1)
    return out


def _cheb_nodes(n):
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


@lru_cache(maxsize=1)
def _q_table():
    """Per-interval 2D Chebyshev coefficients of Q and its xi/u derivatives."""
    tx = _cheb_nodes(_NXI)
    tu = _cheb_nodes(_NU)
    u_nodes = (tu + 1) / 2
    vx_inv = np.linalg.inv(C.chebvander(tx, _NXI - 1))
    vu_inv = np.linalg.inv(C.chebvander(tu, _NU - 1))
    coeffs = []
    for lo, hi in zip(_XI_EDGES[:-1], _XI_EDGES[1:]):
        xi = lo + (hi - lo) * (tx + 1) / 2
        rr, uu = np.meshgrid(np.exp(xi), u_nodes, indexing="ij")
        vals = q_fixed(rr.ravel(), uu.ravel())[0].reshape(rr.shape)
        c = vx_inv @ vals @ vu_inv.T
        # derivatives with respect to xi and u (not to the local variables)
        sx, su = 2 / (hi - lo), 2.0
        c_x = C.chebder(c, axis=0) * sx
        c_xx = C.chebder(c, m=2, axis=0) * sx**2
        c_pad = lambda m: np.pad(m, ((0, _NXI - m.shape[0]), (0, _NU - m.shape[1])))
        cu = C.chebder(c, axis=1) * su
        cuu = C.chebder(c, m=2, axis=1) * su**2
        cxu = C.chebder(c_x, axis=1) * su
        coeffs.append(np.stack([c_pad(m) for m in (c, c_x, c_xx, cu, cxu, cuu)]))
    return np.stack(coeffs)


def q_table(r, u):
    """Q, Q_r, Q_u, Q_rr, Q_ru, Q_uu from the Chebyshev table (falls back to q_fixed)."""
    r = np.asarray(r, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    out = np.empty((6, r.size), dtype=complex)
    xi = np.log(r)
    inside = (r >= TABLE_R_MIN) & (r <= TABLE_R_MAX)
    if np.any(~inside):
        out[:, ~inside] = q_fixed(r[~inside], u[~inside], derivs=True)
    if not np.any(inside):
        return out
    table = _q_table()
    iv = np.clip(np.searchsorted(_XI_EDGES, xi, side="right") - 1, 0, len(_XI_EDGES) - 2)
    for j in np.unique(iv[inside]):
        lo, hi = _XI_EDGES[j], _XI_EDGES[j + 1]
        # real view: one real GEMM instead of a complex one with a promoted real factor
        stacked = np.ascontiguousarray(table[j].transpose(1, 0, 2).reshape(_NXI, -1)).view(float)
        members = np.nonzero(inside & (iv == j))[0]
        for idx in np.array_split(members, max(1, members.size // 40_000)):
            vx = C.chebvander(2 * (xi[idx] - lo) / (hi - lo) - 1, _NXI - 1)
            vu = C.chebvander(2 * u[idx] - 1, _NU - 1)
            prod = (vx @ stacked).view(complex).reshape(idx.size, 6, _NU)
            vals = np.matmul(prod, vu[:, :, None].astype(complex))[..., 0]
            q, q_x, q_xx, q_u, q_xu, q_uu = vals.T
            ri = r[idx]
            out[0, idx] = q
            out[1, idx] = q_x / ri
            out[2, idx] = q_u
            out[3, idx] = (q_xx - q_x) / ri**2
            out[4, idx] = q_xu / ri
            out[5, idx] = q_uu
    return out


def image_kernel(z, k, side_sign):
    """R(z) = Phi_k(|z|) + P(z) with its z-gradient and z-Hessian.

    ``z`` has shape (n, 2) and lies strictly inside the half plane
    side_sign * z_2 > 0. Returns (R, grad (n, 2), hess (n, 2, 2)).
    """
    z = np.asarray(z, dtype=float)
    z1, z2 = z[:, 0], z[:, 1]
    rho = np.hypot(z1, z2)
    if np.any(rho == 0):
        raise CoincidentPointsError("image kernel evaluated at z = 0")
    sg = float(side_sign)
    u = sg * z2 / rho
    r = k * rho
    q, q_r, q_u, q_rr, q_ru, q_uu = q_table(r, u)
    e = np.exp(1j * r) / np.pi
    f = e * q
    f_p = e * (1j * k * q + k * q_r)
    f_pp = e * (-k * k * q + 2j * k * k * q_r + k * k * q_rr)
    f_u = e * q_u
    f_pu = e * (1j * k * q_u + k * q_ru)
    f_uu = e * q_uu

    rho3, rho5 = rho**3, rho**5
    grad_p = z / rho[:, None]
    grad_u = sg * np.stack([-z1 * z2 / rho3, z1 * z1 / rho3], axis=1)
    eye = np.eye(2)
    hess_p = (eye - grad_p[:, :, None] * grad_p[:, None, :]) / rho[:, None, None]
    h11 = -z2 / rho3 + 3 * z1 * z1 * z2 / rho5
    h12 = -z1 / rho3 + 3 * z1 * z2 * z2 / rho5
    h22 = -3 * z1 * z1 * z2 / rho5
    hess_u = sg * np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)

    outer = lambda a, b: a[:, :, None] * b[:, None, :]
    grad = f_p[:, None] * grad_p + f_u[:, None] * grad_u
    hess = (f_pp[:, None, None] * outer(grad_p, grad_p)
            + f_pu[:, None, None] * (outer(grad_p, grad_u) + outer(grad_u, grad_p))
            + f_uu[:, None, None] * outer(grad_u, grad_u)
            + f_p[:, None, None] * hess_p
            + f_u[:, None, None] * hess_u)

    phi, phi_r, phi_rr = phi_radial(rho, k)
    rhat = grad_p
    grad = grad + phi_r[:, None] * rhat
    rr = outer(rhat, rhat)
    hess = hess + phi_rr[:, None, None] * rr + (phi_r / rho)[:, None, None] * (eye - rr)
    return phi + f, grad, hess
