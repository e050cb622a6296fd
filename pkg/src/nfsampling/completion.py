"""Limited-aperture data completion with the prolate matrix.

A column u(theta) of near-field data is expanded in the orthonormal basis
phi_p(theta) = exp(i p theta) / sqrt(2 pi), |p| <= J. Its Fourier
coefficients over an arc [-alpha, alpha] relate to the full-circle ones
through C^alpha = P C, with P the prolate matrix. Completion solves this
with a spectrally regularized inverse and resynthesizes the full circle.

Angles are measured in the local frame of the arc (arc midpoint at 0).
Every sensor of a ring with L sensors owns one angular cell of width
2 pi / L, so an arc of n sensors has half-aperture alpha = n pi / L.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .nearfield import SensorRing


def _check_alpha(alpha):
    if not (0 < alpha <= np.pi + 1e-12):
        raise ValueError("half-aperture alpha must lie in (0, pi]")
    return float(min(alpha, np.pi))


def arc_angles(alpha, count):
    """Cell midpoints of ``count`` equal cells covering [-alpha, alpha]."""
    alpha = _check_alpha(alpha)
    h = 2 * alpha / count
    return -alpha + h * (np.arange(count) + 0.5)


def fourier_basis(theta, J):
    """Matrix of phi_p(theta_j), shape (len(theta), 2J+1), p = -J..J."""
    p = np.arange(-J, J + 1)
    return np.exp(1j * np.outer(theta, p)) / np.sqrt(2 * np.pi)


def _check_J(J, full_count):
    if int(J) != J or J < 0:
        raise ValueError("J must be a nonnegative integer")
    if full_count is not None and 2 * J + 1 > full_count:
        raise ValueError(f"2J+1 = {2 * J + 1} exceeds the {full_count} sensors of the full ring")
    return int(J)


def fourier_coeffs_limited(samples, alpha, J, full_count=None, angles=None):
    """Coefficients c_p = int_{-alpha}^{alpha} u conj(phi_p) dtheta, p = -J..J.

    Parameters
    ----------
    samples : array, shape (n,) or (n, m)
        Values on the arc; extra columns are transformed independently.
    alpha : float
        Half-aperture in (0, pi].
    J : int
        Truncation order. Requires 2J+1 <= full_count.
    full_count : int, optional
        Sensors on the whole ring; inferred as round(pi n / alpha).
    angles : array, optional
        Local sample angles. Defaults to the cell midpoints of the arc.
    """
    u = np.asarray(samples, dtype=complex)
    alpha = _check_alpha(alpha)
    count = u.shape[0]
    if full_count is None:
        full_count = int(round(np.pi * count / alpha))
    J = _check_J(J, full_count)
    theta = arc_angles(alpha, count) if angles is None else np.asarray(angles, dtype=float)
    if theta.shape != (count,):
        raise ValueError("one angle per sample is required")
    h = 2 * alpha / count
    return h * fourier_basis(theta, J).conj().T @ u


def prolate_matrix(alpha, J, n_sensors=None):
    """Prolate matrix p_mn = int_{-alpha}^{alpha} phi_m conj(phi_n) dtheta, m, n = -J..J.

    Without ``n_sensors`` the exact integral is returned:
    alpha/pi on the diagonal and sin((m-n) alpha) / (pi (m-n)) elsewhere.
    With ``n_sensors`` the integral is replaced by the cell-midpoint rule
    on that many sensors, which gives

        h/(2 pi) * sin((m-n) alpha) / sin((m-n) h/2),   h = 2 alpha / n_sensors,

    and makes C^alpha = P C hold exactly for band-limited sampled data.
    """
    alpha = _check_alpha(alpha)
    J = _check_J(J, None)
    d = np.subtract.outer(np.arange(-J, J + 1), np.arange(-J, J + 1)).astype(float)
    off = d != 0
    out = np.full(d.shape, alpha / np.pi)
    if n_sensors is None:
        out[off] = np.sin(d[off] * alpha) / (np.pi * d[off])
    else:
        h = 2 * alpha / n_sensors
        out[off] = h / (2 * np.pi) * np.sin(d[off] * alpha) / np.sin(d[off] * h / 2)
    if alpha == np.pi and n_sensors is None:
        out[off] = 0.0
    return out


def regularized_inverse(P, eps):
    """P_dagger = U diag(1 / (sigma_j + eps)) U^* from P = U diag(sigma) U^*."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    sigma, U = np.linalg.eigh(P)
    return (U / (sigma + eps)) @ U.conj().T


def complete_column(c_alpha, P_dagger, L, center=0.0):
    """Full-circle samples sum_m C_m phi_m(theta_j - center), C = P_dagger c_alpha.

    ``theta_j = -pi + 2 pi j / L`` are the full-ring sensor angles and
    ``center`` the angle of the arc midpoint. Accepts stacked columns.
    """
    c_alpha = np.asarray(c_alpha, dtype=complex)
    P_dagger = np.asarray(P_dagger)
    if P_dagger.shape != (c_alpha.shape[0], c_alpha.shape[0]) or c_alpha.shape[0] % 2 == 0:
        raise ValueError("coefficient vector and P_dagger must both have size 2J+1")
    J = (c_alpha.shape[0] - 1) // 2
    theta = -np.pi + 2 * np.pi * np.arange(L) / L - center
    return fourier_basis(theta, J) @ (P_dagger @ c_alpha)


def completion_operator(ring, J, eps):
    """Linear map A (L_full x n_arc) from arc samples to completed full-ring samples."""
    J = _check_J(J, ring.full_count)
    local = ring.angles - ring.center
    basis = fourier_basis(local, J)
    h = ring.spacing
    P = h * basis.conj().T @ basis
    Pd = regularized_inverse(P, eps)
    full = fourier_basis(-np.pi + h * np.arange(ring.full_count) - ring.center, J)
    return full @ Pd @ (h * basis.conj().T)


def complete_matrix(nf, J=50, eps=1e-3, threads=None, operator=None, chunk=16):
    """Two-pass completion of an arc near-field matrix to the full ring.

    Pass 1 completes the receivers of every arc source column. By
    reciprocity u(x; y) = u(y; x) the transposed result holds arc receivers
    for every full-ring source, and pass 2 completes those rows.
    ``operator`` may carry a precomputed :func:`completion_operator`.
    Columns are processed in fixed chunks, so the result does not depend
    on the number of threads.
    """
    ring = nf.ring
    A = completion_operator(ring, J, eps) if operator is None else operator
    if A.shape != (ring.full_count, ring.count):
        raise ValueError("completion operator does not match the arc")

    def apply(block):
        starts = range(0, block.shape[1], chunk)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda lo: A @ block[:, lo:lo + chunk], starts)
            return np.concatenate(list(parts), axis=1)

    first = apply(nf.entries)
    second = apply(first.T)
    full = SensorRing(ring.radius, ring.full_count, ring.mode)
    return replace(nf, entries=second, ring=full, completed=True)

