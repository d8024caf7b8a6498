"""Single- and double-layer potentials of nodal densities at points off the interface.

Far from the interface the mesh quadrature is used as is. For targets within
a few mesh spacings, the part of the curve within ``window`` nodes of the
closest point is integrated with Gauss panels graded geometrically toward
that point, applied to a local Lagrange interpolant of the density; the rest
keeps the mesh weights with endpoint corrections at the cut. Both routes give
rows of an evaluation matrix, so one matrix serves any number of densities.
"""

import numpy as np

from .bie import OperatorKind, _PairEvaluator
from .surface import gregory_corrections

_GL16 = np.polynomial.legendre.leggauss(16)


def closest_parameter(profile, points, t_guess=None, iters=30):
    """Graph parameter of the point of the interface closest to each target.

    Returns (t, distance). Newton iterations on the stationarity condition
    start from ``t_guess`` (default: the target's own x1).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x1, x2 = points[:, 0], points[:, 1]
    t = x1.copy() if t_guess is None else np.asarray(t_guess, dtype=float).copy()
    for _ in range(iters):
        f, d1, d2 = profile.f(t), profile.df(t), profile.ddf(t)
        g = (t - x1) + (f - x2) * d1
        dg = 1 + d1 * d1 + (f - x2) * d2
        step = g / np.where(dg > 0.1, dg, 0.1)
        t = t - step
        if np.all(np.abs(step) < 1e-14 * (1 + np.abs(t))):
            break
    dist = np.hypot(t - x1, profile.f(t) - x2)
    return t, dist


def lagrange_matrix(t_nodes, t_eval, degree=9):
    """Dense matrix of local Lagrange interpolation from equispaced nodes."""
    n = t_nodes.size
    h = t_nodes[1] - t_nodes[0]
    p = min(degree, n - 1)
    start = np.clip(np.round((t_eval - t_nodes[0]) / h).astype(int) - p // 2, 0, n - 1 - p)
    xi = (t_eval - t_nodes[start]) / h
    out = np.zeros((t_eval.size, n))
    rows = np.arange(t_eval.size)
    for m in range(p + 1):
        w = np.ones_like(xi)
        for q in range(p + 1):
            if q != m:
                w *= (xi - q) / (m - q)
        out[rows, start + m] += w
    return out


def graded_panels(t0, scale, lo, hi, max_len):
    """Gauss nodes/weights on [lo, hi] with panels doubling in size away from t0."""
    t0 = min(max(t0, lo), hi)
    scale = max(scale, 1e-12)
    breaks = {lo, hi, t0}
    for sgn, end in ((1, hi), (-1, lo)):
        s = scale
        while True:
            b = t0 + sgn * s
            if (b - end) * sgn >= 0:
                break
            breaks.add(b)
            s *= 2
    breaks = np.array(sorted(breaks))
    # split long panels
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = max(1, int(np.ceil((b - a) / max_len)))
        pieces.extend(np.linspace(a, b, m + 1)[:-1])
    breaks = np.append(pieces, hi)
    a, b = breaks[:-1, None], breaks[1:, None]
    x, w = _GL16
    nodes = ((a + b) / 2 + (b - a) / 2 * x).ravel()
    weights = ((b - a) / 2 * w).ravel()
    return nodes, weights


def _far_weights(mesh, ia, ib, order):
    """Mesh parameter weights with the open range (ia, ib) removed and endpoint corrections at the cuts."""
    w = mesh.param_weights.copy()
    h = mesh.h
    w[ia + 1:ib] = 0.0
    d = gregory_corrections(order)
    if ia > 0:
        w[ia - order + 1:ia + 1] += h * d[::-1]
    if ib < mesh.n - 1:
        w[ib:ib + order] += h * d
    return w


def potential_matrices(mesh, points, k, a, sign, near_factor=3.0, window=8,
                       gradient=False, order=6):
    """Evaluation matrices of the double and single layer at ``points``.

    Parameters
    ----------
    mesh : SurfaceMesh
    points : (P, 2) array of targets off the interface
    k, a, sign : wavenumber, strip height and side (+1 above h_minus, -1 below h_plus)
    near_factor : targets closer than near_factor * h use the graded near rule
    gradient : also return the x-gradients of both potentials

    Returns
    -------
    dict with ``D`` and ``S`` of shape (P, N) and, if requested, ``dD`` and
    ``dS`` of shape (P, N, 2).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    side = "plus" if sign > 0 else "minus"
    op_d, op_s = OperatorKind("K", side, k, a), OperatorKind("S", side, k, a)
    nodes, nu = mesh.nodes, -mesh.normals
    P, N = len(points), mesh.n

    out = {"D": np.empty((P, N), complex), "S": np.empty((P, N), complex)}
    if gradient:
        out["dD"] = np.empty((P, N, 2), complex)
        out["dS"] = np.empty((P, N, 2), complex)

    t0, dist = closest_parameter(mesh.profile, points)
    if np.any(dist < 1e-14):
        raise ValueError("target lies on the interface")
    near = dist < near_factor * mesh.h

    far_idx = np.nonzero(~near)[0]
    for rows in np.array_split(far_idx, max(1, far_idx.size * N // 200_000)):
        if rows.size == 0:
            continue
        ev = _PairEvaluator(points[rows, None, :], nodes[None, :, :], np.zeros(2), nu[None, :, :])
        out["D"][rows] = ev.kernel(op_d) * mesh.weights
        out["S"][rows] = ev.kernel(op_s) * mesh.weights
        if gradient:
            out["dD"][rows] = ev.target_gradient(op_d) * mesh.weights[:, None]
            out["dS"][rows] = ev.target_gradient(op_s) * mesh.weights[:, None]

    prof, tn, h = mesh.profile, mesh.params, mesh.h
    for p in np.nonzero(near)[0]:
        i0 = int(np.clip(np.round((t0[p] - tn[0]) / h), 0, N - 1))
        ia, ib = i0 - window, i0 + window
        if ia < 2 * order:
            ia = 0
        if ib > N - 1 - 2 * order:
            ib = N - 1
        wfar = _far_weights(mesh, ia, ib, order) * mesh.jacobian
        tf, wf = graded_panels(t0[p], 0.5 * dist[p], tn[ia], tn[ib], h)
        jf = np.hypot(1.0, prof.df(tf))
        interp = lagrange_matrix(tn, tf) * (wf * jf)[:, None]
        x = points[p]
        ev_c = _PairEvaluator(x[None, :], nodes, np.zeros(2), nu)
        ev_f = _PairEvaluator(x[None, :], prof.point(tf), np.zeros(2), -prof.normal(tf))
        out["D"][p] = ev_c.kernel(op_d) * wfar + ev_f.kernel(op_d) @ interp
        out["S"][p] = ev_c.kernel(op_s) * wfar + ev_f.kernel(op_s) @ interp
        if gradient:
            for key, op in (("dD", op_d), ("dS", op_s)):
                gc = ev_c.target_gradient(op) * wfar[:, None]
                gf = np.einsum("fc,fn->nc", ev_f.target_gradient(op), interp)
                out[key][p] = gc + gf
    return out
