"""Admissibility gate, incident fields, the dense solve, and field evaluation."""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import gmres

from .bie import assemble_M
from .layers import closest_parameter, potential_matrices
from .model import DensityPair, MediumParams
from .specfun import phi_radial, radial_hessian

__all__ = [
    "MediumParams", "DensityPair", "Admissibility", "admissibility_check",
    "PlaneWave", "PointSource", "HypersingularSource", "incident_field", "incident_traces",
    "SingularSystemError", "LinearSolver", "solve_densities", "ScatterSolution",
    "solve_scattering", "field_matrices", "evaluate_field", "evaluate_fields",
    "evaluate_field_grid",
]


class SingularSystemError(RuntimeError):
    """The system matrix is numerically singular."""


class SourceOnSurfaceError(ValueError):
    """A point source lies on (or below) the interface."""


class TooCloseError(ValueError):
    """A field point is too close to the interface for the requested accuracy."""


# --------------------------------------------------------------------------
# admissibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    reason: str = ""

    def __bool__(self):
        return self.admissible


def admissibility_check(params):
    """Uniqueness condition (mu - 1)(k_+^2 - k_-^2 mu) >= 0 with k_+^2 != k_-^2 mu."""
    kp2, km2, mu = params.k_plus**2, params.k_minus**2, params.mu
    if kp2 == km2 * mu:
        return Admissibility(False, f"k_plus^2 = k_minus^2 * mu ({kp2:g} = {km2 * mu:g})")
    value = (mu - 1) * (kp2 - km2 * mu)
    if value < 0:
        return Admissibility(False, f"(mu - 1)(k_plus^2 - k_minus^2 mu) = {value:g} < 0")
    return Admissibility(True)


# --------------------------------------------------------------------------
# incident fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWave:
    """exp(i k_+ x . d) with a downward unit direction d."""

    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (2,) or abs(np.hypot(*d) - 1) > 1e-12:
            raise ValueError("plane-wave direction must be a unit 2-vector")
        if d[1] >= 0:
            raise ValueError("plane-wave direction must point downward (d2 < 0)")

    tag = "plane_wave"


@dataclass(frozen=True)
class PointSource:
    """Phi_{k_+}(x, y) for a source y above the interface."""

    y: tuple
    tag = "point_source"


@dataclass(frozen=True)
class HypersingularSource:
    """grad_x Phi_{k_+}(x, y) . direction for a source y above the interface."""

    y: tuple
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (2,) or abs(np.hypot(*d) - 1) > 1e-12:
            raise ValueError("hypersingular direction must be a unit 2-vector")

    tag = "hypersingular"


def source_fields(y, k, x, direction=None):
    """Phi_k(x, y) and its x-gradient, or, with ``direction`` e, grad Phi . e and its x-gradient."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x - np.asarray(y, dtype=float)
    r = np.hypot(d[:, 0], d[:, 1])
    if np.any(r < 1e-14):
        raise SourceOnSurfaceError("field point coincides with the source")
    phi, phi_r, phi_rr = phi_radial(r, k)
    grad = (phi_r / r)[:, None] * d
    if direction is None:
        return phi, grad
    e = np.asarray(direction, dtype=float)
    hess = radial_hessian(d, r, phi_r, phi_rr)
    return grad @ e, hess @ e


def incident_field(inc, x, k):
    """Incident field and its gradient at points ``x`` (shape (P, 2))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(inc, PlaneWave):
        d = np.asarray(inc.direction, dtype=float)
        u = np.exp(1j * k * (x @ d))
        return u, 1j * k * u[:, None] * d
    if isinstance(inc, PointSource):
        return source_fields(inc.y, k, x)
    if isinstance(inc, HypersingularSource):
        return source_fields(inc.y, k, x, inc.direction)
    raise TypeError(f"unsupported incident field {inc!r}")


def _check_source(inc, profile):
    if isinstance(inc, (PointSource, HypersingularSource)):
        y = np.asarray(inc.y, dtype=float)
        _, dist = closest_parameter(profile, y[None, :])
        if y[1] <= profile.f(y[0]) or dist[0] < 1e-6:
            raise SourceOnSurfaceError("point sources must lie above the interface by >= 1e-6")


def incident_traces(inc, mesh, k_plus):
    """Boundary data g1 = -u^i and g2 = -du^i/dn on the mesh (n pointing down).

    Plane-wave data are multiplied by the mesh taper; point sources are not.
    """
    _check_source(inc, mesh.profile)
    u, grad = incident_field(inc, mesh.nodes, k_plus)
    dn = (grad * mesh.normals).sum(axis=1)
    g1, g2 = -u, -dn
    if isinstance(inc, PlaneWave):
        g1, g2 = g1 * mesh.taper, g2 * mesh.taper
    return g1, g2


# --------------------------------------------------------------------------
# linear solve
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolveDiagnostics:
    method: str
    residual: float
    condition_estimate: float
    iterations: int = 0


class LinearSolver:
    """Factorized (or GMRES-backed) system reusable for many right-hand sides."""

    def __init__(self, system, method="lu", tol=1e-10, restart=80, pivot_tol=1e-13):
        if method not in ("lu", "gmres"):
            raise ValueError("method must be 'lu' or 'gmres'")
        self.system = system
        self.matrix = system.matrix
        self.method = method
        self.tol = tol
        self.restart = restart
        if not np.all(np.isfinite(self.matrix)):
            raise SingularSystemError("system matrix has non-finite entries")
        anorm = np.abs(self.matrix).sum(axis=0).max()
        self._lu = linalg.lu_factor(self.matrix, check_finite=False)
        piv = np.abs(np.diag(self._lu[0]))
        if piv.min() < pivot_tol * piv.max():
            raise SingularSystemError(f"pivot ratio {piv.min() / piv.max():.3e} below {pivot_tol:g}")
        rcond, info = linalg.lapack.zgecon(self._lu[0], anorm, norm="1")
        self.condition_estimate = float(1 / rcond) if rcond > 0 else np.inf

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        its = 0
        if self.method == "lu":
            chi = linalg.lu_solve(self._lu, rhs, check_finite=False)
        else:
            counter = []
            chi, info = gmres(self.matrix, rhs, rtol=self.tol, restart=self.restart, maxiter=50,
                              callback=lambda _: counter.append(1), callback_type="pr_norm")
            its = len(counter)
            if info != 0:
                raise SingularSystemError(f"GMRES did not converge (info={info})")
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(self.matrix @ chi - rhs) / bnorm if bnorm > 0 else 0.0
        return chi, SolveDiagnostics(self.method, float(res), self.condition_estimate, its)


def solve_densities(system, rhs, method="lu", tol=1e-10, restart=80):
    """Densities (phi, psi) solving the system for rhs = (g1, g2)."""
    g1, g2 = rhs
    if len(g1) != system.n or len(g2) != system.n:
        raise ValueError("right-hand side does not match the system size")
    chi, diag = LinearSolver(system, method, tol, restart).solve(np.concatenate([g1, g2]))
    return DensityPair.from_stacked(chi), diag


# --------------------------------------------------------------------------
# solutions and field evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatterSolution:
    densities: DensityPair
    mesh: object
    params: MediumParams
    incident: object
    diagnostics: dict = field(default_factory=dict)


def solve_scattering(mesh, params, incident, method="lu", tol=1e-10, quadrature="corrected_trapezoid",
                     system=None):
    """Assemble (unless ``system`` is given), solve, and package the solution."""
    system = assemble_M(mesh, params, quadrature) if system is None else system
    g = incident_traces(incident, mesh, params.k_plus)
    dens, diag = solve_densities(system, g, method, tol)
    diagnostics = {
        "residual": diag.residual,
        "condition_estimate": diag.condition_estimate,
        "method": diag.method,
        "admissible": admissibility_check(params).admissible,
        "window": [mesh.A, mesh.A_core],
        "N": mesh.n,
    }
    return ScatterSolution(dens, mesh, params, incident, diagnostics)


def field_matrices(mesh, params, points, gradient=False, near_factor=3.0):
    """Matrices E_phi, E_psi with u = E_phi phi + E_psi psi at ``points``.

    Points above the interface get u_+ = D+ phi + S+ psi, points below get
    u_- = (D- phi + S- psi) / mu, with the layers acting on the tapered
    densities as in the system matrix. Returns (E_phi, E_psi, region) and,
    with ``gradient``, the x-gradient matrices as a second pair.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    prof = mesh.profile
    above = points[:, 1] > prof.f(points[:, 0])
    region = np.where(above, "plus", "minus")
    P, N = len(points), mesh.n
    e_phi = np.zeros((P, N), complex)
    e_psi = np.zeros((P, N), complex)
    g_phi = np.zeros((P, N, 2), complex) if gradient else None
    g_psi = np.zeros((P, N, 2), complex) if gradient else None
    sides = ((above, params.k_plus, params.h_minus, 1.0, 1.0),
             (~above, params.k_minus, params.h_plus, -1.0, 1.0 / params.mu))
    for mask, k, a, sign, scale in sides:
        if not np.any(mask):
            continue
        out = potential_matrices(mesh, points[mask], k, a, sign, near_factor=near_factor, gradient=gradient)
        col = scale * mesh.density_taper
        e_phi[mask] = out["D"] * col
        e_psi[mask] = out["S"] * col
        if gradient:
            g_phi[mask] = out["dD"] * col[:, None]
            g_psi[mask] = out["dS"] * col[:, None]
    if gradient:
        return (e_phi, e_psi, region), (g_phi, g_psi)
    return e_phi, e_psi, region


def evaluate_fields(sol, points, min_distance=None):
    """Scattered field u_+ (above) or transmitted field u_- (below) at many points.

    Raises TooCloseError for points within ``min_distance`` (default a tenth
    of the mesh spacing) of the interface.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = sol.mesh
    min_distance = 0.1 * mesh.h if min_distance is None else min_distance
    _, dist = closest_parameter(mesh.profile, points)
    if np.any(dist < min_distance):
        raise TooCloseError(f"point within {min_distance:g} of the interface")
    e_phi, e_psi, region = field_matrices(mesh, sol.params, points)
    return e_phi @ sol.densities.phi + e_psi @ sol.densities.psi, region


def evaluate_field(sol, x, min_distance=None):
    """Field value and region ("plus" or "minus") at a single point."""
    u, region = evaluate_fields(sol, np.asarray(x, dtype=float)[None, :], min_distance)
    return complex(u[0]), str(region[0])


@dataclass(frozen=True)
class FieldTable:
    """Row-major grid table; masked rows carry NaN field values."""

    x1: np.ndarray
    x2: np.ndarray
    u: np.ndarray
    region: np.ndarray
    masked: np.ndarray

    @property
    def masked_fraction(self):
        return float(self.masked.mean())


def evaluate_field_grid(sol, x1_range, x2_range, n1, n2, tube=None):
    """Evaluate on an n1 x n2 grid; points within ``tube`` of the interface are masked.

    ``tube`` defaults to the plain-quadrature distance of three mesh spacings.
    Rows run over x1 fastest within each x2 line.
    """
    tube = 3 * sol.mesh.h if tube is None else tube
    g1 = np.linspace(*x1_range, n1) if n1 > 1 else np.array([x1_range[0]], float)
    g2 = np.linspace(*x2_range, n2) if n2 > 1 else np.array([x2_range[0]], float)
    X2, X1 = np.meshgrid(g2, g1, indexing="ij")
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    _, dist = closest_parameter(sol.mesh.profile, pts)
    masked = dist < tube
    u = np.full(len(pts), np.nan + 1j * np.nan)
    region = np.where(pts[:, 1] > sol.mesh.profile.f(pts[:, 0]), "plus", "minus")
    if np.any(~masked):
        u[~masked], _ = evaluate_fields(sol, pts[~masked], min_distance=0.0)
    return FieldTable(pts[:, 0], pts[:, 1], u, region, masked)
