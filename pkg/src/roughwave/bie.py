"""Boundary integral operators on the interface and their Nystrom matrices.

Kernels are built from the impedance Green's functions of the two half
planes: side ``plus`` uses (k_plus, strip height h_minus) and lives above
h_minus, side ``minus`` uses (k_minus, h_plus) and lives below h_plus.

Normal derivatives in the operators are taken along nu = -n, the unit normal
pointing up into the upper medium (n itself points down, out of it). With
this orientation the double layer jumps by +phi from below to above and the
system matrix takes the block form

    [[K+ - K-/mu + (1 + mu)/(2 mu) I,  S+ - S-/mu],
     [T- - T+,                          K'- - K'+ + I]].

Quadrature. In the graph parameter every kernel times the arclength factor
splits as L(t, tau) ln|t - tau| + M(t, tau) with L, M smooth and all of the
singularity in the free-space term. Off the diagonal the kernel is sampled
directly with the mesh weights; the diagonal gets the finite part M(t, t)
from analytic limits and the log part is handled either by a zeta-corrected
trapezoid rule (5-point stencil, high order) or by singularity subtraction.
"""

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import factorial, zeta

from .halfplane import image_kernel
from .specfun import EULER_GAMMA, free_space_radial, log_coefficient_radial

TAGS = ("S", "K", "Kprime", "T")
QUADRATURES = ("corrected_trapezoid", "singularity_subtraction")
_EPS = np.array([-1.0, 1.0])  # d/dy of z = x - y' flips the first component only


class DegeneratePairWarning(UserWarning):
    """Equal wavenumbers in a T difference; the free-space parts cancel."""


@dataclass(frozen=True)
class OperatorKind:
    """One boundary operator on one side of the interface."""

    tag: str
    side: str
    k: float
    strip_height: float

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown operator tag {self.tag!r}")
        if self.side not in ("plus", "minus"):
            raise ValueError("side must be 'plus' or 'minus'")
        if not self.k > 0:
            raise ValueError("wavenumber must be > 0")

    @property
    def sign(self):
        return 1.0 if self.side == "plus" else -1.0


def operator_kind(tag, side, params):
    """Operator ``tag`` on ``side`` with the wavenumber and strip of ``params``."""
    if side == "plus":
        return OperatorKind(tag, "plus", params.k_plus, params.h_minus)
    return OperatorKind(tag, "minus", params.k_minus, params.h_plus)


def worker_count():
    """Thread count for assembly, capped by ROUGHWAVE_THREADS."""
    cap = os.environ.get("ROUGHWAVE_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


# --------------------------------------------------------------------------
# kernel evaluation on broadcastable point sets
# --------------------------------------------------------------------------

class _PairEvaluator:
    """Kernels for all pairs (x, y) of two broadcastable point sets.

    Free-space radial functions and image kernels are cached per wavenumber
    and strip so that several operators on the same pairs share the work.
    Pairs with x = y get placeholder free-space values.
    """

    def __init__(self, x, y, nux, nuy):
        self.d = x - y
        self.shape = self.d.shape[:-1]
        self.r = np.hypot(self.d[..., 0], self.d[..., 1])
        self.rs = np.where(self.r > 0, self.r, 1.0)
        self.x, self.y = np.broadcast_to(x, self.d.shape), np.broadcast_to(y, self.d.shape)
        self.nux = np.broadcast_to(nux, self.d.shape)
        self.nuy = np.broadcast_to(nuy, self.d.shape)
        self.dnx = (self.d * self.nux).sum(-1)
        self.dny = (self.d * self.nuy).sum(-1)
        self.nxy = (self.nux * self.nuy).sum(-1)
        self._free = {}
        self._image = {}

    def free(self, k):
        if k not in self._free:
            self._free[k] = free_space_radial(self.rs, k)
        return self._free[k]

    def image(self, k, a, sign):
        key = (k, a, sign)
        if key not in self._image:
            z = self.x.copy()
            z[..., 1] -= 2 * a
            z[..., 0] -= self.y[..., 0]
            z[..., 1] += self.y[..., 1]
            R, g, H = image_kernel(z.reshape(-1, 2), k, sign)
            self._image[key] = (R.reshape(self.shape), g.reshape(self.shape + (2,)),
                                H.reshape(self.shape + (2, 2)))
        return self._image[key]

    def image_part(self, op):
        R, g, H = self.image(op.k, op.strip_height, op.sign)
        if op.tag == "S":
            return R
        if op.tag == "K":
            return (self.nuy * _EPS * g).sum(-1)
        if op.tag == "Kprime":
            return (self.nux * g).sum(-1)
        return np.einsum("...i,...ij,...j->...", self.nux, H, _EPS * self.nuy)

    def free_part(self, op):
        phi, phi_r, f_r, f_rr = self.free(op.k)
        r = self.rs
        if op.tag == "S":
            return phi
        if op.tag == "K":
            return -phi_r * self.dny / r
        if op.tag == "Kprime":
            return phi_r * self.dnx / r
        # regular part only: the Laplace part cancels in every admissible T combination
        hess = (f_rr - f_r / r) * self.dnx * self.dny / r**2 + f_r / r * self.nxy
        return -hess

    def kernel(self, op):
        return self.free_part(op) + self.image_part(op)

    def target_gradient(self, op):
        """x-gradient of the S or K (double-layer) kernel, shape (..., 2)."""
        phi, phi_r, f_r, f_rr = self.free(op.k)
        R, g, H = self.image(op.k, op.strip_height, op.sign)
        r = self.rs[..., None]
        rhat = self.d / r
        if op.tag == "S":
            return phi_r[..., None] * rhat + g
        if op.tag != "K":
            raise ValueError("target gradients exist for S and K kernels only")
        phi_rr = f_rr + 1 / (2 * np.pi * self.rs**2)
        rn = (rhat * self.nuy).sum(-1)[..., None]
        hess_nu = phi_rr[..., None] * rn * rhat + (phi_r[..., None] / r) * (self.nuy - rn * rhat)
        return -hess_nu + np.einsum("...ij,...j->...i", H, _EPS * self.nuy)

    def log_coefficient(self, op):
        a, a1, a2 = log_coefficient_radial(self.r**2, op.k)
        if op.tag == "S":
            return a
        if op.tag == "K":
            return -2 * a1 * self.dny
        if op.tag == "Kprime":
            return 2 * a1 * self.dnx
        return -2 * a1 * self.nxy - 4 * a2 * self.dnx * self.dny


def _c_k(k):
    return 0.25j - (np.log(k / 2) + EULER_GAMMA) / (2 * np.pi)


def _free_diagonal(op, jac, ddf):
    """Finite part of the free-space kernel at x = y (coefficient of ln|x - y| removed)."""
    if op.tag == "S":
        return np.full(jac.shape, _c_k(op.k))
    if op.tag in ("K", "Kprime"):
        return (ddf / (4 * np.pi * jac**3)).astype(complex)
    k2 = op.k**2
    return np.full(jac.shape, k2 / (8 * np.pi) + 0.5 * k2 * _c_k(op.k))


def _terms(spec):
    """Normalize an operator or a list of (coefficient, operator) pairs."""
    if isinstance(spec, OperatorKind):
        terms = [(1.0, spec)]
    else:
        terms = [(float(c), op) for c, op in spec]
    t_weight = sum(c for c, op in terms if op.tag == "T")
    if any(op.tag == "T" for _, op in terms) and abs(t_weight) > 1e-14:
        raise ValueError("T is hypersingular and only enters as a difference T_a - T_b")
    return terms


def _combine(terms, fn):
    return sum(c * fn(op) for c, op in terms)


def kernel_split(kind, profile, x1, y1):
    """Split a kernel as L ln|x - y| + M for x = (x1, f(x1)), y = (y1, f(y1)).

    ``kind`` is an OperatorKind (S, K or Kprime) or a list of
    (coefficient, OperatorKind) pairs whose T coefficients sum to zero.
    Kernels are per unit arclength in y. For x1 == y1 the analytic diagonal
    limit of M is returned. Returns (log_coefficient, smooth_remainder).
    """
    terms = _terms(kind)
    x = profile.point(np.asarray(x1, dtype=float))
    y = profile.point(np.asarray(y1, dtype=float))
    nux = -profile.normal(x1)
    nuy = -profile.normal(y1)
    ev = _PairEvaluator(x, y, nux, nuy)
    L = _combine(terms, ev.log_coefficient)
    if np.all(ev.r == 0):
        jac = np.hypot(1.0, profile.df(np.asarray(x1, dtype=float)))
        ddf = profile.ddf(np.asarray(x1, dtype=float))
        M = _combine(terms, lambda op: _free_diagonal(op, jac, ddf) + ev.image_part(op))
        return L, M
    if np.any(ev.r == 0):
        raise ValueError("mixed diagonal and off-diagonal pairs")
    return L, _combine(terms, ev.kernel) - L * np.log(ev.r)


def kernel_value(kind, profile, x1, y1):
    """Kernel of an operator or admissible combination at x != y (per arclength in y)."""
    terms = _terms(kind)
    ev = _PairEvaluator(profile.point(x1), profile.point(y1), -profile.normal(x1), -profile.normal(y1))
    if np.any(ev.r == 0):
        raise ValueError("kernel_value needs x != y; use kernel_split for the diagonal")
    return _combine(terms, ev.kernel)


# --------------------------------------------------------------------------
# Nystrom assembly
# --------------------------------------------------------------------------

def log_stencil_weights():
    """Weights gamma_0, gamma_1, gamma_2 of the 5-point log-correction stencil.

    Together with the diagonal weight h ln(h / 2 pi), the correction
    h sum_l gamma_|l| g(t_i + l h) removes the h^3 and h^5 error terms of the
    punctured trapezoid rule for g(tau) ln|t_i - tau|.
    """
    zeta_prime = lambda k: (-1) ** k * factorial(2 * k) * zeta(2 * k + 1) / (2 * (2 * np.pi) ** (2 * k))
    lhs = np.array([[2.0 * l ** (2 * k) for l in (1, 2)] for k in (1, 2)])
    rhs = np.array([2 * zeta_prime(1), 2 * zeta_prime(2)])
    g = np.linalg.solve(lhs, rhs)
    return np.array([-2 * g.sum(), g[0], g[1]])


def log_integral(t, A):
    """Exact integral of ln|t - tau| over tau in [-A, A]."""
    t = np.asarray(t, dtype=float)
    p, m = A - t, A + t
    xlogx = lambda v: np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    return xlogx(p) + xlogx(m) - 2 * A


def _check_mesh(mesh, quadrature):
    if quadrature not in QUADRATURES:
        raise ValueError(f"unknown quadrature {quadrature!r}; expected one of {QUADRATURES}")
    if mesh.rule != "trapezoid":
        raise ValueError("assembly needs an equispaced trapezoid mesh")


def _row_chunks(n, target=200_000):
    m = max(1, target // max(n, 1))
    return [np.arange(s, min(s + m, n)) for s in range(0, n, m)]


def _assemble(mesh, combos, quadrature):
    """Nystrom matrices for several operator combinations in one sweep."""
    _check_mesh(mesh, quadrature)
    combos = [_terms(c) for c in combos]
    n = mesh.n
    nodes, nu, W = mesh.nodes, -mesh.normals, mesh.weights
    blocks = [np.empty((n, n), dtype=complex) for _ in combos]

    def fill(rows):
        ev = _PairEvaluator(nodes[rows, None, :], nodes[None, :, :], nu[rows, None, :], nu[None, :, :])
        for b, terms in zip(blocks, combos):
            b[rows] = _combine(terms, ev.kernel) * W

    chunks = _row_chunks(n)
    workers = min(worker_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, chunks))
    else:
        for rows in chunks:
            fill(rows)

    i = np.arange(n)
    h, jac, t = mesh.h, mesh.jacobian, mesh.params
    diag_ev = _PairEvaluator(nodes, nodes, nu, nu)
    for b, terms in zip(blocks, combos):
        L = _combine(terms, diag_ev.log_coefficient) * jac
        M = jac * (_combine(terms, lambda op: _free_diagonal(op, jac, mesh.ddf) + diag_ev.image_part(op))
                   + L / jac * np.log(jac))
        if quadrature == "corrected_trapezoid":
            gam = log_stencil_weights()
            b[i, i] = h * (M + L * np.log(h / (2 * np.pi))) + h * gam[0] * L
            for l in (-2, -1, 1, 2):
                ii = i[(i + l >= 0) & (i + l < n)]
                jj = ii + l
                ev = _PairEvaluator(nodes[ii], nodes[jj], nu[ii], nu[jj])
                b[ii, jj] += h * gam[abs(l)] * _combine(terms, ev.log_coefficient) * jac[jj]
        else:
            dt = np.abs(t[:, None] - t[None, :])
            np.fill_diagonal(dt, 1.0)
            logsum = (mesh.param_weights[None, :] * np.log(dt)).sum(axis=1)
            b[i, i] = mesh.param_weights * M + L * (log_integral(t, mesh.A) - logsum)
    return blocks


def assemble_block(kind, mesh, quadrature="corrected_trapezoid"):
    """Nystrom matrix of one operator (S, K or Kprime) or an admissible combination."""
    return _assemble(mesh, [kind], quadrature)[0]


def assemble_T_difference(mesh, params, quadrature="corrected_trapezoid"):
    """T on the minus side minus T on the plus side, as one weakly singular kernel."""
    if params.k_plus == params.k_minus:
        import warnings

        warnings.warn("k_plus == k_minus: the free-space parts of the T difference cancel",
                      DegeneratePairWarning, stacklevel=2)
    return assemble_block(_t_difference(params), mesh, quadrature)


def _t_difference(params):
    return [(1.0, operator_kind("T", "minus", params)), (-1.0, operator_kind("T", "plus", params))]


def system_combinations(params):
    """The four block kernels of the system matrix (identity shifts excluded)."""
    op = lambda tag, side: operator_kind(tag, side, params)
    inv_mu = 1.0 / params.mu
    return [
        [(1.0, op("K", "plus")), (-inv_mu, op("K", "minus"))],
        [(1.0, op("S", "plus")), (-inv_mu, op("S", "minus"))],
        _t_difference(params),
        [(1.0, op("Kprime", "minus")), (-1.0, op("Kprime", "plus"))],
    ]


@dataclass(frozen=True)
class SystemMatrix:
    """Assembled 2N x 2N system with the block layout documented in the module."""

    matrix: np.ndarray
    n: int
    k_plus: float
    k_minus: float
    mu: float
    shift_phi: float
    shift_psi: float

    @property
    def dim(self):
        return 2 * self.n

    def block(self, i, j):
        n = self.n
        return self.matrix[i * n:(i + 1) * n, j * n:(j + 1) * n]


def assemble_M(mesh, params, quadrature="corrected_trapezoid"):
    """System matrix for the densities (phi, psi).

    The integral operators act on the tapered densities (mesh.density_taper times
    phi, psi), so the truncated integrands vanish smoothly at the window ends
    and no endpoint singularity forms in the solution.
    """
    params.check_profile(mesh.profile)
    b11, b12, b21, b22 = (b * mesh.density_taper[None, :]
                          for b in _assemble(mesh, system_combinations(params), quadrature))
    n = mesh.n
    shift = (1 + params.mu) / (2 * params.mu)
    b11[np.diag_indices(n)] += shift
    b22[np.diag_indices(n)] += 1.0
    return SystemMatrix(np.block([[b11, b12], [b21, b22]]), n,
                        params.k_plus, params.k_minus, params.mu, shift, 1.0)


# --------------------------------------------------------------------------
# layer potentials at points off the interface
# --------------------------------------------------------------------------

def potential_kernels(points, y, nuy, k, a, sign):
    """Double- and single-layer kernels (per arclength) for targets ``points``.

    Returns arrays of shape (len(points), len(y)). The double layer
    differentiates along nu_y = -n_y.
    """
    points = np.asarray(points, dtype=float)
    ev = _PairEvaluator(points[:, None, :], y[None, :, :], np.zeros(2), nuy[None, :, :])
    if np.any(ev.r < 1e-14):
        raise ValueError("target coincides with a quadrature node")
    side = "plus" if sign > 0 else "minus"
    dk = ev.kernel(OperatorKind("K", side, k, a))
    sk = ev.kernel(OperatorKind("S", side, k, a))
    return dk, sk


# --------------------------------------------------------------------------
# binary dump
# --------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIddd")


def dump_matrix(path, system):
    """Write the matrix as a 32-byte header and little-endian complex64 entries, row-major."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"BIEM", system.dim, system.k_plus, system.k_minus, system.mu))
        fh.write(np.ascontiguousarray(system.matrix, dtype="<c8").tobytes())


def load_matrix(path):
    """Read a matrix written by ``dump_matrix``; returns (matrix, k_plus, k_minus, mu)."""
    with open(path, "rb") as fh:
        magic, dim, kp, km, mu = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != b"BIEM":
            raise ValueError("not a BIEM matrix file")
        data = np.frombuffer(fh.read(), dtype="<c8")
    if data.size != dim * dim:
        raise ValueError("truncated BIEM matrix file")
    return data.reshape(dim, dim).astype(complex), kp, km, mu
