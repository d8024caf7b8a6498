"""Interface profiles x_2 = f(x_1), truncated quadrature meshes and taper windows."""

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate, optimize, special

PROFILE_KINDS = ("flat", "gaussian_bump", "damped_sine", "custom_spline")
RULES = ("trapezoid", "gauss_panels")


@dataclass(frozen=True)
class SurfaceProfile:
    """Graph profile with analytic first and second derivatives.

    ``f_minus`` and ``f_plus`` are the infimum and supremum of f.
    """

    kind: str
    params: dict
    f: Callable
    df: Callable
    ddf: Callable
    f_minus: float
    f_plus: float
    support: tuple = (-np.inf, np.inf)

    def point(self, x1):
        x1 = np.asarray(x1, dtype=float)
        return np.stack([x1, self.f(x1)], axis=-1)

    def normal(self, x1):
        """Unit normal (f', -1)/sqrt(1 + f'^2), pointing down out of the upper medium."""
        d = self.df(np.asarray(x1, dtype=float))
        jac = np.hypot(1.0, d)
        return np.stack([d / jac, -1.0 / jac], axis=-1)

    def curvature(self, x1):
        x1 = np.asarray(x1, dtype=float)
        return self.ddf(x1) / (1 + self.df(x1) ** 2) ** 1.5


def _finite(name, value, positive=False):
    value = float(value)
    if not np.isfinite(value) or (positive and value <= 0):
        raise ValueError(f"{name} must be finite{' and > 0' if positive else ''}, got {value}")
    return value


def _sweep_extrema(f, lo, hi, n=20001):
    """Global min and max of f on [lo, hi] by a dense sweep refined locally."""
    x = np.linspace(lo, hi, n)
    v = f(x)

    def refine(g, i):
        a, b = x[max(i - 1, 0)], x[min(i + 1, n - 1)]
        res = optimize.minimize_scalar(g, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        return min(g(x[i]), res.fun)

    return refine(f, int(np.argmin(v))), -refine(lambda t: -f(t), int(np.argmax(v)))


def make_profile(kind, **params):
    """Build a profile of the given kind.

    Parameters
    ----------
    kind : {"flat", "gaussian_bump", "damped_sine", "custom_spline"}
    params
        flat: ``c`` (height, default 0).
        gaussian_bump: ``h`` (height), ``sigma`` (width), ``center`` (default 0);
        f = h exp(-(x - center)^2 / (2 sigma^2)).
        damped_sine: ``h``, ``period``, ``decay``;
        f = h sin(2 pi x / period) exp(-(x / decay)^2).
        custom_spline: ``x`` and ``f`` sample arrays, or ``path`` to a CSV of
        (x1, f) rows; natural cubic spline, valid on the sample range only.
    """
    if kind == "flat":
        c = _finite("c", params.get("c", 0.0))
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return SurfaceProfile(kind, {"c": c}, lambda x: zero(x) + c, zero, zero, c, c)

    if kind == "gaussian_bump":
        h = _finite("h", params["h"])
        s = _finite("sigma", params.get("sigma", 1.0), positive=True)
        x0 = _finite("center", params.get("center", 0.0))
        g = lambda x: np.exp(-((np.asarray(x, dtype=float) - x0) ** 2) / (2 * s * s))
        f = lambda x: h * g(x)
        df = lambda x: -h * (np.asarray(x, dtype=float) - x0) / s**2 * g(x)
        ddf = lambda x: h * (((np.asarray(x, dtype=float) - x0) / s**2) ** 2 - 1 / s**2) * g(x)
        return SurfaceProfile(kind, {"h": h, "sigma": s, "center": x0}, f, df, ddf,
                              min(0.0, h), max(0.0, h))

    if kind == "damped_sine":
        h = _finite("h", params["h"])
        per = _finite("period", params.get("period", 2 * np.pi), positive=True)
        dec = _finite("decay", params.get("decay", 5.0), positive=True)
        w = 2 * np.pi / per

        def parts(x):
            x = np.asarray(x, dtype=float)
            e = np.exp(-((x / dec) ** 2))
            de = -2 * x / dec**2 * e
            dde = (4 * x * x / dec**4 - 2 / dec**2) * e
            return np.sin(w * x), w * np.cos(w * x), -w * w * np.sin(w * x), e, de, dde

        def f(x):
            s, _, _, e, _, _ = parts(x)
            return h * s * e

        def df(x):
            s, ds, _, e, de, _ = parts(x)
            return h * (ds * e + s * de)

        def ddf(x):
            s, ds, dds, e, de, dde = parts(x)
            return h * (dds * e + 2 * ds * de + s * dde)

        lo, hi = _sweep_extrema(f, -6 * dec, 6 * dec)
        return SurfaceProfile(kind, {"h": h, "period": per, "decay": dec}, f, df, ddf,
                              min(lo, 0.0), max(hi, 0.0))

    if kind == "custom_spline":
        if "path" in params:
            xs, fs = read_profile_csv(params["path"])
        else:
            xs = np.asarray(params["x"], dtype=float)
            fs = np.asarray(params["f"], dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 4:
            raise ValueError("custom_spline needs at least 4 matching (x1, f) samples")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(fs))):
            raise ValueError("custom_spline samples must be finite")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("custom_spline samples must be strictly increasing in x1")
        sp = interpolate.CubicSpline(xs, fs, bc_type="natural")
        d1, d2 = sp.derivative(1), sp.derivative(2)
        crit = d1.roots(extrapolate=False)
        cand = np.concatenate([fs, sp(crit)]) if crit.size else fs
        return SurfaceProfile(kind, {"x": xs.tolist(), "f": fs.tolist()},
                              lambda x: sp(np.asarray(x, dtype=float)),
                              lambda x: d1(np.asarray(x, dtype=float)),
                              lambda x: d2(np.asarray(x, dtype=float)),
                              float(cand.min()), float(cand.max()),
                              support=(float(xs[0]), float(xs[-1])))

    raise ValueError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")


def read_profile_csv(path):
    """Read (x1, f) samples from a CSV file; a non-numeric header row is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
    if not rows:
        raise ValueError(f"no samples in {path}")
    data = np.array(rows)
    return data[:, 0], data[:, 1]


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return a / (a + b)


# The integral operators see the densities through a window that is flat up
# to this fraction of A (or A_core, if larger). Fading the operators removes
# the endpoint singularities of a hard cut; keeping the fade outside the data
# ramp keeps the interface physical wherever the incident data live.
DENSITY_RAMP_START = 0.75


def taper_weights(x1, A, A_core):
    """Window equal to 1 on |x1| <= A_core, decaying smoothly to 0 at |x1| = A."""
    return smooth_step((A - np.abs(np.asarray(x1, dtype=float))) / (A - A_core))


def gregory_corrections(order=6):
    """Endpoint corrections delta_0..delta_{order-1} of the trapezoid rule.

    The rule h * sum_j (1 + delta_j) g_j (delta mirrored at the right end,
    zero in the interior) integrates smooth functions to O(h^order). The
    delta_j solve sum_j delta_j j^p = -zeta(-p) regularised, p < order.
    """
    p = np.arange(order)
    rhs = np.empty(order)
    rhs[0] = -0.5
    b = special.bernoulli(order + 1)
    rhs[1:] = b[p[1:] + 1] / (p[1:] + 1)
    vander = np.vander(np.arange(order, dtype=float), order, increasing=True).T
    return np.linalg.solve(vander, rhs)


@dataclass(frozen=True)
class SurfaceMesh:
    """Nodes on the truncated interface and everything the quadrature needs.

    ``weights`` already include the arclength Jacobian; ``normals`` point down,
    out of the upper medium.
    """

    profile: SurfaceProfile
    A: float
    A_core: float
    rule: str
    params: np.ndarray
    nodes: np.ndarray
    jacobian: np.ndarray
    param_weights: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    ddf: np.ndarray
    taper: np.ndarray
    density_taper: np.ndarray
    h: float = field(default=np.nan)

    @property
    def n(self):
        return self.params.size

    @property
    def window(self):
        return (-self.A, self.A)


def make_mesh(profile, A, A_core, N, rule="trapezoid", order=6):
    """Discretize the part of the interface with |x1| <= A.

    ``trapezoid`` places N equispaced nodes on [-A, A] with endpoint-corrected
    trapezoid weights of the given order; ``gauss_panels`` uses N / 16 panels
    of 16 Gauss-Legendre nodes (mesh integration only, not for assembly).
    """
    A = _finite("A", A, positive=True)
    A_core = _finite("A_core", A_core, positive=True)
    if A_core >= A:
        raise ValueError("window error: need 0 < A_core < A")
    if int(N) != N or N < 16:
        raise ValueError("degenerate mesh: need an integer N >= 16")
    N = int(N)
    lo, hi = profile.support
    if -A < lo or A > hi:
        raise ValueError(f"window [-{A}, {A}] exceeds the profile support {profile.support}")
    if rule == "trapezoid":
        t = np.linspace(-A, A, N)
        h = t[1] - t[0]
        w = np.full(N, h)
        d = gregory_corrections(order)
        if N < 2 * order:
            raise ValueError(f"degenerate mesh: trapezoid rule of order {order} needs N >= {2 * order}")
        w[:order] += h * d
        w[-order:] += h * d[::-1]
    elif rule == "gauss_panels":
        if N % 16:
            raise ValueError("gauss_panels needs N divisible by 16")
        x, wg = np.polynomial.legendre.leggauss(16)
        edges = np.linspace(-A, A, N // 16 + 1)
        a, b = edges[:-1, None], edges[1:, None]
        t = ((a + b) / 2 + (b - a) / 2 * x).ravel()
        w = ((b - a) / 2 * wg).ravel()
        h = float(edges[1] - edges[0])
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    d1 = profile.df(t)
    jac = np.hypot(1.0, d1)
    dd = profile.ddf(t)
    return SurfaceMesh(
        profile=profile, A=A, A_core=A_core, rule=rule, params=t,
        nodes=profile.point(t), jacobian=jac, param_weights=w, weights=w * jac,
        normals=np.stack([d1 / jac, -1.0 / jac], axis=1),
        curvature=dd / jac**3, ddf=dd, taper=taper_weights(t, A, A_core),
        density_taper=taper_weights(t, A, max(DENSITY_RAMP_START * A, A_core)), h=float(h),
    )


def default_margin(profile):
    return 0.25 * (1.0 + profile.f_plus - profile.f_minus)


def strip_heights(profile, margin=None):
    """(h_minus, h_plus) = (f_minus - margin, f_plus + margin)."""
    margin = default_margin(profile) if margin is None else _finite("margin", margin, positive=True)
    return profile.f_minus - margin, profile.f_plus + margin
