"""Fourier-Bessel probe functions, sampling indicators and grid sweeps.

For a sampling point z and sensors y_j on a ring of radius r the probes are

    phi_z(y) = sum_{|n|<=M} w_n J_n(k|z|) / H_n(k r) cos(n(theta_y - theta_z))
    psi_z(y) = sum_{|n|<=m} w_n J_n(k|z|) / J_n(k r) cos(n(theta_y - theta_z))

Two weightings are available:

``"delta"`` (default)
    w_n = 4 / (i pi r (1 + delta_{0n})), the classical form.
``"uniform"``
    w_n = 2 / (i pi r). Single-layer images then equal the truncated
    Bessel/Hankel sums of :func:`h_phi_closed_form` and
    :func:`s_psi_closed_form` exactly.

The two differ only by a factor 2 on every n != 0 term. Imaging with
``"uniform"`` can show a spurious maximum at the centre of a disk when
J_0(ka)/H_0(ka) is close to 1 in modulus (e.g. a=2, k=10).
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import EigenvalueProximityError, FormatError
from .nearfield import Mode
from .specfun import bessel_j, hankel1

DEFAULT_TRUNCATION = {Mode.OBSTACLE: 32, Mode.CAVITY: 3}
NORMALIZATIONS = ("delta", "uniform")
BESSEL_FLOOR = 1e-13
GROWTH_LIMIT = 1e8


class ProbeGrowthWarning(RuntimeWarning):
    """Cavity probe coefficients are large enough to amplify noise badly."""


@dataclass(frozen=True)
class ProbeVector:
    values: np.ndarray = field(repr=False)
    z: tuple
    truncation: int
    mode: Mode


def _polar(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rho = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.where(rho > 0, np.arctan2(pts[:, 1], pts[:, 0]), 0.0)
    return rho, theta


def _radial_weights(ring, k, truncation, normalization):
    """Folded per-order factor for the cosine sum over n = 0..truncation.

    Pairs +-n are merged, so n >= 1 carries twice its signed-order weight.
    """
    if int(truncation) != truncation or truncation < 0:
        raise ValueError("truncation must be a nonnegative integer")
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    n = np.arange(int(truncation) + 1)
    kr = k * ring.radius
    if ring.mode is Mode.OBSTACLE:
        denom = hankel1(n, kr)
    else:
        denom = bessel_j(n, kr)
        small = np.abs(denom) <= BESSEL_FLOOR
        if np.any(small):
            raise EigenvalueProximityError(
                f"J_{int(n[small][0])}(k r_i) is numerically zero; choose another r_i or k"
            )
    fold = np.where(n == 0, 1.0, 4.0 if normalization == "delta" else 2.0)
    return n, fold * 2.0 / (1j * np.pi * ring.radius) / denom


def probe_matrix(points, ring, k, truncation, normalization="delta"):
    """Probe values for many sampling points, shape (P, ring.count).

    Uses cos(n(a - b)) = cos(na)cos(nb) + sin(na)sin(nb) so the cost is one
    pair of (P, M+1) x (M+1, L) products.
    """
    n, c = _radial_weights(ring, k, truncation, normalization)
    rho, theta = _polar(points)
    if ring.mode is Mode.CAVITY and truncation > 0:
        growth = (rho.max() / ring.radius) ** truncation
        if growth > GROWTH_LIMIT:
            warnings.warn(
                f"cavity probe grows like (|z|/r_i)^m = {growth:.1e}; expect noise amplification",
                ProbeGrowthWarning,
                stacklevel=2,
            )
    a = bessel_j(n[None, :], k * rho[:, None]) * c[None, :]
    nt = n[None, :] * theta[:, None]
    ns = n[:, None] * ring.angles[None, :]
    return (a * np.cos(nt)) @ np.cos(ns) + (a * np.sin(nt)) @ np.sin(ns)


def _probe(z, ring, k, truncation, mode, normalization):
    if ring.mode is not mode:
        raise ValueError(f"{mode.value} probe needs a {mode.value} sensor ring")
    z = tuple(float(v) for v in z)
    values = probe_matrix([z], ring, k, truncation, normalization)[0]
    return ProbeVector(values, z, int(truncation), mode)


def probe_obstacle(z, ring, k, M=32, normalization="delta"):
    """Obstacle probe phi_z sampled at the sensors of ``ring``."""
    return _probe(z, ring, k, M, Mode.OBSTACLE, normalization)


def probe_cavity(z, ring, k, m=3, normalization="delta"):
    """Cavity probe psi_z sampled at the sensors of ``ring``.

    Raises
    ------
    EigenvalueProximityError
        If some J_n(k r_i), |n| <= m, is numerically zero.
    """
    return _probe(z, ring, k, m, Mode.CAVITY, normalization)


def _entries(n):
    return getattr(n, "entries", n)


def _check_dims(n, v):
    if n.shape != (v.size, v.size):
        raise ValueError(f"matrix {n.shape} does not match probe of length {v.size}")


def indicator_obstacle(nf, probe):
    """|phi^T N phi| with a plain (non-conjugating) transpose."""
    n, v = _entries(nf), np.asarray(getattr(probe, "values", probe))
    _check_dims(n, v)
    return float(abs(v @ n @ v))


def indicator_cavity(nf, probe):
    """|psi^* N psi| with the conjugate transpose."""
    n, v = _entries(nf), np.asarray(getattr(probe, "values", probe))
    _check_dims(n, v)
    return float(abs(np.conj(v) @ n @ v))


def indicator_values(nf, points, truncation=None, threads=None, chunk=4096, normalization="delta"):
    """Raw (unnormalized) indicator at each sampling point.

    Points are processed in independent chunks; the result does not depend
    on the number of threads.
    """
    ring, k = nf.ring, nf.k
    if truncation is None:
        truncation = DEFAULT_TRUNCATION[ring.mode]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("no sampling points")
    nt = nf.entries.T
    cavity = ring.mode is Mode.CAVITY
    # trigger validation and the growth warning once, in the caller's thread
    probe_matrix(points[np.argmax(np.hypot(*points.T))][None], ring, k, truncation, normalization)

    def work(lo):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProbeGrowthWarning)
            p = probe_matrix(points[lo:lo + chunk], ring, k, truncation, normalization)
        left = np.conj(p) if cavity else p
        return np.abs(np.sum(left * (p @ nt), axis=1))

    starts = range(0, points.shape[0], chunk)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.concatenate(list(pool.map(work, starts)))


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of nx * ny nodes including the corners."""

    x0: float = -5.0
    x1: float = 5.0
    y0: float = -5.0
    y1: float = 5.0
    nx: int = 301
    ny: int = 301

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one node per axis")
        if not (self.x1 >= self.x0 and self.y1 >= self.y0):
            raise ValueError("grid ranges must be increasing")

    @property
    def xs(self):
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y0, self.y1, self.ny)

    def points(self):
        """Nodes in row-major order with y increasing by row."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


DEFAULT_GRIDS = {
    Mode.OBSTACLE: GridSpec(-5.0, 5.0, -5.0, 5.0, 301, 301),
    Mode.CAVITY: GridSpec(-4.0, 4.0, -4.0, 4.0, 81, 81),
}


@dataclass
class ImagingGrid:
    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.spec.ny, self.spec.nx):
            raise ValueError("values must have shape (ny, nx)")

    def save(self, path):
        s = self.spec
        lines = [
            "IMG 1",
            f"nx={s.nx} ny={s.ny} x0={s.x0!r} x1={s.x1!r} y0={s.y0!r} y1={s.y1!r}",
        ]
        lines += [" ".join(f"{v:.16e}" for v in row) for row in self.values]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().splitlines()
        if len(lines) < 2 or lines[0].strip() != "IMG 1":
            raise FormatError("missing 'IMG 1' magic line")
        try:
            meta = dict(tok.split("=", 1) for tok in lines[1].split())
            spec = GridSpec(
                float(meta["x0"]), float(meta["x1"]), float(meta["y0"]), float(meta["y1"]),
                int(meta["nx"]), int(meta["ny"]),
            )
            rows = [[float(v) for v in ln.split()] for ln in lines[2:] if ln.strip()]
        except (KeyError, ValueError) as exc:
            raise FormatError("malformed IMG file") from exc
        if len(rows) != spec.ny or any(len(r) != spec.nx for r in rows):
            raise FormatError(f"expected {spec.ny} rows of {spec.nx} values")
        return cls(spec, np.array(rows))


def normalize(values):
    peak = np.max(values)
    if not np.isfinite(peak) or peak <= 0:
        raise FloatingPointError("indicator is identically zero or non-finite; cannot normalize")
    return values / peak


def sweep(nf, spec=None, truncation=None, threads=None, normalization="delta"):
    """Evaluate the mode-matched indicator on a grid and normalize to max 1."""
    if spec is None:
        spec = DEFAULT_GRIDS[nf.ring.mode]
    raw = indicator_values(nf, spec.points(), truncation, threads, normalization=normalization)
    return ImagingGrid(spec, normalize(raw).reshape(spec.ny, spec.nx))


def _sum_terms(x, z, k, M, radial):
    (rx,), (tx,) = _polar(x)
    (rz,), (tz,) = _polar(z)
    n = np.arange(int(M) + 1)
    mult = np.where(n == 0, 1.0, 2.0)
    return np.sum(mult * radial(n, k * rx) * bessel_j(n, k * rz) * np.cos(n * (tx - tz)))


def h_phi_closed_form(x, z, k, M):
    """sum_{|n|<=M} J_n(k|x|) J_n(k|z|) cos(n theta_xz); tends to J_0(k|x-z|)."""
    return float(_sum_terms(x, z, k, M, bessel_j))


def s_psi_closed_form(x, z, k, m):
    """sum_{|n|<=m} H_n(k|x|) J_n(k|z|) cos(n theta_xz); tends to H_0(k|x-z|) for |x|>|z|."""
    if np.hypot(*np.asarray(x, dtype=float)) == 0:
        raise ValueError("x must not be the origin")
    return complex(_sum_terms(x, z, k, m, hankel1))
