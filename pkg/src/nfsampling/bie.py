"""Nystrom boundary-integral solvers for sound-soft scatterers in 2D.

Kernels with a logarithmic singularity are split as

    K(t, tau) = K1(t, tau) * log(4 sin^2((t - tau) / 2)) + K2(t, tau)

and the log factor is integrated exactly against trigonometric
interpolants (Martensen-Kussmaul / Kress quadrature). On analytic curves
this converges exponentially in the number of nodes.

Exterior (obstacle) problems use the combined-field representation

    u^s(x) = int [d Phi(x, y)/d nu(y) - i k Phi(x, y)] psi(y) ds(y),

which is uniquely solvable at every wavenumber. The interior (cavity)
problem uses a pure single layer.
"""

import numpy as np
from scipy import linalg, signal, special

from .exceptions import EigenvalueProximityError, GeometryError
from .geometry import ParametricCurve, discretize

COND_LIMIT = 1e12
MIN_NODES = 16


def _check_k(k):
    k = float(k)
    if not np.isfinite(k) or k <= 0:
        raise ValueError("wavenumber must be positive and finite")
    return k


def _points(p):
    p = np.asarray(p, dtype=float)
    return p.reshape(-1, 2)


def fundamental_solution(x, y, k):
    """Free-space Green's function (i/4) H_0^(1)(k |x - y|).

    ``x`` and ``y`` broadcast as arrays of 2D points (last axis of size 2).
    """
    k = _check_k(k)
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise ValueError("fundamental solution evaluated at coincident points")
    return 0.25j * special.hankel1(0, k * r)


def log_quadrature_weights(n):
    """Weights R_ij with sum_j R_ij f(t_j) ~ int log(4 sin^2((t_i - tau)/2)) f(tau) dtau.

    Exact for trigonometric polynomials of degree below n/2.
    """
    t = 2 * np.pi * np.arange(n) / n
    m = np.arange(1, n // 2)
    r = -(4 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(axis=1)
    r -= (4 * np.pi / n**2) * np.cos(0.5 * n * t)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return r[idx]


def _pair_geometry(disc):
    diff = disc.nodes[:, None, :] - disc.nodes[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(r, 1.0)
    dt = disc.t[:, None] - disc.t[None, :]
    logterm = np.log(4 * np.sin(0.5 * dt) ** 2 + np.eye(disc.n))
    return diff, r, logterm


def _single_layer_self(disc, k, geom=None):
    diff, r, logterm = geom or _pair_geometry(disc)
    n = disc.n
    s = disc.speed
    kr = k * r
    m = 0.25j * special.hankel1(0, kr) * s[None, :]
    m1 = -special.j0(kr) * s[None, :] / (4 * np.pi)
    m2 = m - m1 * logterm
    diag = (0.25j - np.euler_gamma / (2 * np.pi) - np.log(0.5 * k * s) / (2 * np.pi)) * s
    np.fill_diagonal(m1, -s / (4 * np.pi))
    np.fill_diagonal(m2, diag)
    return log_quadrature_weights(n) * m1 + (2 * np.pi / n) * m2


def _double_layer_self(disc, k, geom=None):
    diff, r, logterm = geom or _pair_geometry(disc)
    n = disc.n
    d1 = disc.tangents
    # q = (x(t) - x(tau)) . (unit outward normal at tau) * |x'(tau)|
    q = d1[None, :, 1] * diff[..., 0] - d1[None, :, 0] * diff[..., 1]
    kr = k * r
    l_full = 0.25j * k * special.hankel1(1, kr) * q / r
    l1 = -k * special.j1(kr) * q / (4 * np.pi * r)
    l2 = l_full - l1 * logterm
    curv = (disc.second[:, 0] * d1[:, 1] - disc.second[:, 1] * d1[:, 0]) / disc.speed**2
    np.fill_diagonal(l1, 0.0)
    np.fill_diagonal(l2, curv / (4 * np.pi))
    return log_quadrature_weights(n) * l1 + (2 * np.pi / n) * l2


def _smooth_single_layer(targets, disc, k):
    d = targets[:, None, :] - disc.nodes[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    return 0.25j * special.hankel1(0, k * r) * disc.arc_weights[None, :]


def _smooth_double_layer(targets, disc, k):
    d = targets[:, None, :] - disc.nodes[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    t = disc.tangents
    q = t[None, :, 1] * d[..., 0] - t[None, :, 0] * d[..., 1]
    return 0.25j * k * special.hankel1(1, k * r) * q / r * disc.weight


def assemble_single_layer(disc, k, conjugated=False):
    """Nystrom matrix A with (A psi)_i ~ int_Gamma Phi(x_i, y) psi(y) ds_y.

    With ``conjugated=True`` the kernel is conj(Phi); since the log part of
    the split is real this is exactly the entrywise conjugate.
    """
    k = _check_k(k)
    if disc.n % 2:
        raise ValueError("discretization must have an even number of nodes")
    a = _single_layer_self(disc, k)
    return a.conj() if conjugated else a


def assemble_double_layer(disc, k):
    """Nystrom matrix of the double-layer operator (normal derivative at y)."""
    return _double_layer_self(disc, _check_k(k))


def _discretize_all(curves, n):
    if isinstance(curves, ParametricCurve):
        curves = [curves]
    if int(n) != n or n % 2 or n < MIN_NODES:
        raise ValueError(f"n must be an even integer >= {MIN_NODES}")
    return [discretize(c, int(n)) for c in curves]


def _combined_field_system(discs, k):
    eta = k
    blocks = []
    for i, di in enumerate(discs):
        row = []
        for j, dj in enumerate(discs):
            if i == j:
                geom = _pair_geometry(di)
                b = 0.5 * np.eye(di.n) + _double_layer_self(di, k, geom)
                b -= 1j * eta * _single_layer_self(di, k, geom)
            else:
                b = _smooth_double_layer(di.nodes, dj, k) - 1j * eta * _smooth_single_layer(di.nodes, dj, k)
            row.append(b)
        blocks.append(row)
    return np.block(blocks)


def _check_conditioning(a, what):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise EigenvalueProximityError(
            f"{what} has condition number {cond:.3g}; k^2 is (near) a Dirichlet eigenvalue"
        )


MAX_RESAMPLE = 2048


def _resample_factors(disc, targets):
    """Per-target oversampling so that targets sit >= 8 node spacings off the curve."""
    poly = disc.curve.polygon(8192)
    gap = np.max(np.hypot(*np.diff(poly, axis=0).T))
    dist = np.maximum(disc.curve.distance(targets) - gap, 1e-12)
    h = float(np.max(disc.arc_weights))
    need = np.ceil(np.log2(np.maximum(8 * h / dist, 1.0)))
    return (2 ** np.minimum(need, np.log2(MAX_RESAMPLE))).astype(int)


def _potential(discs, densities, targets, k, single_coef, double):
    """Evaluate single_coef * SL[psi] (+ DL[psi] if ``double``) off the boundary."""
    out = np.zeros((targets.shape[0],) + densities[0].shape[1:], dtype=complex)
    for disc, dens in zip(discs, densities):
        factors = _resample_factors(disc, targets)
        for factor in np.unique(factors):
            sel = factors == factor
            fine, fdens = disc, dens
            if factor > 1:
                fdens = signal.resample(dens, disc.n * factor, axis=0)
                fine = discretize(disc.curve, disc.n * factor)
            kern = single_coef * _smooth_single_layer(targets[sel], fine, k)
            if double:
                kern = kern + _smooth_double_layer(targets[sel], fine, k)
            out[sel] += kern @ fdens
    return out


def _check_outside(curves, pts, what):
    for c in curves:
        if np.any(c.contains(pts)) or np.any(c.distance(pts) < 1e-9):
            raise GeometryError(f"{what} must lie strictly outside every obstacle")


def _check_inside(curve, pts, what):
    if not np.all(curve.contains(pts)) or np.any(curve.distance(pts) < 1e-9):
        raise GeometryError(f"{what} must lie strictly inside the cavity")


def exterior_scattered_field(curves, k, sources, receivers, n):
    """Scattered fields u^s(receiver; source) for all pairs, sound-soft obstacles.

    ``curves`` may hold several disjoint components; they are coupled in a
    single block system. Returns an array of shape (n_receivers, n_sources).
    """
    k = _check_k(k)
    sources, receivers = _points(sources), _points(receivers)
    discs = _discretize_all(curves, n)
    curves = [d.curve for d in discs]
    _check_outside(curves, sources, "sources")
    _check_outside(curves, receivers, "receivers")
    a = _combined_field_system(discs, k)
    _check_conditioning(a, "combined-field system")
    nodes = np.concatenate([d.nodes for d in discs])
    rhs = -fundamental_solution(nodes[:, None, :], sources[None, :, :], k)
    psi = linalg.lu_solve(linalg.lu_factor(a), rhs)
    split = np.cumsum([d.n for d in discs])[:-1]
    return _potential(discs, np.split(psi, split), receivers, k, -1j * k, double=True)


def solve_exterior_dirichlet(curve, k, source, receivers, n=256):
    """Scattered field of a point source at ``source`` off a sound-soft obstacle."""
    return exterior_scattered_field(curve, k, _points(source)[:1], receivers, n)[:, 0]


def interior_scattered_field(curve, k, sources, receivers, n):
    """Scattered fields inside a sound-soft cavity, shape (n_receivers, n_sources)."""
    k = _check_k(k)
    sources, receivers = _points(sources), _points(receivers)
    (disc,) = _discretize_all(curve, n)
    _check_inside(disc.curve, sources, "sources")
    _check_inside(disc.curve, receivers, "receivers")
    a = _single_layer_self(disc, k)
    _check_conditioning(a, "interior single-layer system")
    rhs = -fundamental_solution(disc.nodes[:, None, :], sources[None, :, :], k)
    psi = linalg.lu_solve(linalg.lu_factor(a), rhs)
    return _potential([disc], [psi], receivers, k, 1.0, double=False)


def solve_interior_dirichlet(curve, k, source, receivers, n=128):
    """Scattered field of a point source inside a sound-soft cavity."""
    return interior_scattered_field(curve, k, _points(source)[:1], receivers, n)[:, 0]


def assemble_T(disc, k):
    """Discrete T: boundary samples of g to the density h with conj-single-layer h = g."""
    a = assemble_single_layer(disc, k, conjugated=True)
    _check_conditioning(a, "conjugated single-layer matrix")
    return np.linalg.inv(a)


def pairing(disc, h, g):
    """Discrete duality pairing <h, g> = sum_j h_j conj(g_j) |x'(t_j)| 2*pi/n."""
    return np.sum(disc.arc_weights * h * np.conj(g))


def _ring_to_boundary(disc, sensors, sensor_weight, k):
    return fundamental_solution(disc.nodes[:, None, :], sensors[None, :, :], k) * sensor_weight


def factorized_obstacle_operator(disc, sensors, sensor_weight, k):
    """Near-field kernel matrix rebuilt as -R H* T R H (entries comparable to N).

    H maps sensor samples to boundary traces, H* is its weighted adjoint and
    R is complex conjugation. The operator acts on g through the sensor
    weight, which is divided out again so the result matches u^s(x_i; y_j).
    """
    sensors = _points(sensors)
    h = _ring_to_boundary(disc, sensors, sensor_weight, k)
    h_star = h.conj().T / sensor_weight * disc.arc_weights[None, :]
    t = assemble_T(disc, k)
    # R A R g = conj(A) g for any linear A
    op = -np.conj(h_star @ t) @ h
    return op / sensor_weight


def factorized_cavity_operator(disc, sensors, sensor_weight, k):
    """Near-field kernel matrix rebuilt as -S* T S for a cavity."""
    sensors = _points(sensors)
    s = _ring_to_boundary(disc, sensors, sensor_weight, k)
    s_star = s.conj().T / sensor_weight * disc.arc_weights[None, :]
    op = -s_star @ assemble_T(disc, k) @ s
    return op / sensor_weight


def _polar(p):
    p = _points(p)
    return np.hypot(p[:, 0], p[:, 1]), np.arctan2(p[:, 1], p[:, 0])


def mie_circle_exterior(a, k, source, receiver, trunc=None):
    """Series solution for a sound-soft disk of radius ``a`` centred at the origin."""
    k = _check_k(k)
    (rx,), (tx,) = _polar(receiver)
    (ry,), (ty,) = _polar(source)
    if rx < a or ry < a:
        raise GeometryError("source and receiver must lie outside the circle")
    if trunc is None:
        trunc = int(np.ceil(k * max(rx, ry))) + 40
    n = np.arange(trunc + 1)
    mult = np.where(n == 0, 1.0, 2.0)
    coef = special.jv(n, k * a) / special.hankel1(n, k * a)
    terms = mult * coef * special.hankel1(n, k * ry) * special.hankel1(n, k * rx) * np.cos(n * (tx - ty))
    return -0.25j * terms.sum()


def mie_circle_interior(a, k, source, receiver, trunc=None):
    """Series solution inside a sound-soft circular cavity of radius ``a``."""
    k = _check_k(k)
    (rx,), (tx,) = _polar(receiver)
    (ry,), (ty,) = _polar(source)
    if rx > a or ry > a:
        raise GeometryError("source and receiver must lie inside the circle")
    if trunc is None:
        trunc = int(np.ceil(k * a)) + 40
    n = np.arange(trunc + 1)
    jka = special.jv(n, k * a)
    # relative distance from ka to the nearest zero of J_n: J_n / (x J_n')
    near_zero = np.abs(jka) < 1e-13 * np.abs(k * a * special.jvp(n, k * a))
    if np.any(near_zero):
        bad = int(n[near_zero][0])
        raise EigenvalueProximityError(f"J_{bad}(k a) vanishes; k^2 is a Dirichlet eigenvalue")
    mult = np.where(n == 0, 1.0, 2.0)
    terms = mult * special.hankel1(n, k * a) / jka * special.jv(n, k * ry) * special.jv(n, k * rx)
    return -0.25j * (terms * np.cos(n * (tx - ty))).sum()
