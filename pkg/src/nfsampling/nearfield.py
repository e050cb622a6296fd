"""Near-field measurement matrices: synthesis, noise, restriction and NFM files.

NFM text format::

    NFM 1
    mode=<obstacle|cavity> L=<int> radius=<float> k=<float> delta=<float> [aperture=<alpha> center=<angle>] [completed=true]
    <row 0: 2L floats, Re/Im alternating>
    ...

Row index is the receiver, column index the source. Sensor j of a full
ring sits at angle -pi + 2*pi*j/L.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import bie
from .exceptions import FormatError, GeometryError


class Mode(str, Enum):
    OBSTACLE = "obstacle"
    CAVITY = "cavity"


@dataclass(frozen=True)
class SensorRing:
    """Equidistant sensors on a circle centred at the origin.

    A limited-aperture arc is the contiguous run of ``count`` sensors that
    starts at index ``start`` of a ring with ``full_count`` sensors.
    """

    radius: float
    count: int
    mode: Mode = Mode.OBSTACLE
    start: int = 0
    full_count: int = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError("ring radius must be positive")
        if self.full_count is None:
            object.__setattr__(self, "full_count", int(self.count))
        if self.full_count < 8:
            raise ValueError("a sensor ring needs at least 8 sensors")
        if not 1 <= self.count <= self.full_count:
            raise ValueError("arc sensor count must lie in [1, full_count]")

    @property
    def is_full(self):
        return self.count == self.full_count

    @property
    def spacing(self):
        return 2 * np.pi / self.full_count

    @property
    def angles(self):
        idx = (self.start + np.arange(self.count)) % self.full_count
        return -np.pi + self.spacing * idx

    @property
    def points(self):
        a = self.angles
        return self.radius * np.stack([np.cos(a), np.sin(a)], axis=1)

    @property
    def weight(self):
        """Arc length owned by one sensor, 2*pi*r/L."""
        return self.radius * self.spacing

    @property
    def alpha(self):
        """Half-aperture: each sensor owns one cell of width 2*pi/L."""
        return 0.5 * self.count * self.spacing

    @property
    def center(self):
        """Angle of the arc midpoint (0 for a full ring)."""
        if self.is_full:
            return 0.0
        mid = -np.pi + self.spacing * (self.start + 0.5 * (self.count - 1))
        return float((mid + np.pi) % (2 * np.pi) - np.pi)

    def arc(self, start, count):
        if not self.is_full:
            raise ValueError("can only cut an arc out of a full ring")
        return replace(self, start=int(start) % self.full_count, count=int(count))


@dataclass
class NearFieldMatrix:
    """entries[i, j] = u^s(x_i; y_j) for receiver x_i and source y_j."""

    entries: np.ndarray = field(repr=False)
    ring: SensorRing
    k: float
    noise_delta: float = 0.0
    completed: bool = False

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (self.ring.count, self.ring.count):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match {self.ring.count} sensors"
            )

    @property
    def mode(self):
        return self.ring.mode

    def asymmetry(self):
        """||N - N^T|| / ||N|| in the spectral norm."""
        nrm = np.linalg.norm(self.entries, 2)
        return np.linalg.norm(self.entries - self.entries.T, 2) / nrm if nrm else 0.0


def _check_scene(scene, ring):
    if ring.mode is Mode.OBSTACLE:
        for c in scene:
            if c.max_radius() >= ring.radius:
                raise GeometryError("every obstacle must lie strictly inside the sensor ring")
        for i, a in enumerate(scene):
            for b in scene[i + 1:]:
                if np.any(a.contains(b.polygon(512))) or np.any(b.contains(a.polygon(512))):
                    raise GeometryError("obstacle components overlap")
    else:
        if len(scene) != 1:
            raise GeometryError("cavity mode needs exactly one cavity boundary")
        ring_pts = ring.radius * np.exp(1j * np.linspace(0, 2 * np.pi, 512, endpoint=False))
        if not np.all(scene[0].contains(np.c_[ring_pts.real, ring_pts.imag])):
            raise GeometryError("the sensor ring must lie strictly inside the cavity")


def synthesize(scene, ring, k, n_bie=256):
    """Simulate the clean near-field matrix of a scene.

    Parameters
    ----------
    scene : list of ParametricCurve
        Disjoint obstacle components, or a single cavity boundary.
    ring : SensorRing
        Sensors act both as point sources and receivers.
    k : float
        Wavenumber.
    n_bie : int
        Nystrom nodes per boundary component.
    """
    scene = list(scene)
    _check_scene(scene, ring)
    pts = ring.points
    if not scene:
        entries = np.zeros((ring.count, ring.count), dtype=complex)
    elif ring.mode is Mode.OBSTACLE:
        entries = bie.exterior_scattered_field(scene, k, pts, pts, n_bie)
    else:
        entries = bie.interior_scattered_field(scene[0], k, pts, pts, n_bie)
    return NearFieldMatrix(entries, ring, float(k))


def add_noise(nf, delta, seed=None):
    """Relative complex Gaussian perturbation, ||N^delta - N|| = delta ||N||."""
    if not np.isfinite(delta) or delta < 0:
        raise ValueError("noise level must be nonnegative")
    if delta == 0:
        return replace(nf, entries=nf.entries.copy())
    rng = np.random.default_rng(seed)
    shape = nf.entries.shape
    e = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    scale = delta * np.linalg.norm(nf.entries, 2) / np.linalg.norm(e, 2)
    return replace(nf, entries=nf.entries + scale * e, noise_delta=float(delta))


def restrict(nf, start, count):
    """Keep the sub-block for a contiguous arc of ``count`` sensors from index ``start``."""
    arc = nf.ring.arc(start, count)
    idx = (arc.start + np.arange(arc.count)) % arc.full_count
    return replace(nf, entries=nf.entries[np.ix_(idx, idx)].copy(), ring=arc)


def arc_around(ring, center, alpha):
    """Start index and count of the arc of sensor cells covering [center - alpha, center + alpha]."""
    count = int(round(alpha / np.pi * ring.full_count))
    if not 1 <= count <= ring.full_count:
        raise ValueError("aperture must satisfy 0 < alpha <= pi")
    j_center = (center + np.pi) / ring.spacing
    start = int(np.floor(j_center - 0.5 * count + 0.5 + 1e-9))
    return start % ring.full_count, count


def _fmt(x):
    return repr(float(x))


def save(nf, path):
    ring = nf.ring
    header = (
        f"mode={ring.mode.value} L={ring.count} radius={_fmt(ring.radius)} "
        f"k={_fmt(nf.k)} delta={_fmt(nf.noise_delta)}"
    )
    if not ring.is_full:
        header += f" aperture={_fmt(ring.alpha)} center={_fmt(ring.center)}"
    if nf.completed:
        header += " completed=true"
    lines = ["NFM 1", header]
    pairs = np.empty((ring.count, 2 * ring.count))
    pairs[:, 0::2] = nf.entries.real
    pairs[:, 1::2] = nf.entries.imag
    for row in pairs:
        lines.append(" ".join(f"{v:.16e}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line):
    try:
        meta = dict(tok.split("=", 1) for tok in line.split())
        mode = Mode(meta["mode"])
        count = int(meta["L"])
        radius, k, delta = float(meta["radius"]), float(meta["k"]), float(meta["delta"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed NFM header: {line!r}") from exc
    if "aperture" in meta:
        alpha, center = float(meta["aperture"]), float(meta.get("center", 0.0))
        full = int(round(np.pi * count / alpha))
        spacing = 2 * np.pi / full
        start = int(round((center + np.pi) / spacing - 0.5 * (count - 1))) % full
        ring = SensorRing(radius, count, mode, start, full)
    else:
        ring = SensorRing(radius, count, mode)
    return ring, k, delta, meta.get("completed", "false") == "true"


def load(path):
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or lines[0].strip() != "NFM 1":
        raise FormatError("missing 'NFM 1' magic line")
    ring, k, delta, completed = _parse_header(lines[1])
    rows = [ln for ln in lines[2:] if ln.strip()]
    if len(rows) != ring.count:
        raise FormatError(f"header declares L={ring.count} but file has {len(rows)} rows")
    try:
        data = np.array([[float(v) for v in ln.split()] for ln in rows])
    except ValueError as exc:
        raise FormatError("non-numeric matrix entry") from exc
    if data.shape != (ring.count, 2 * ring.count):
        raise FormatError(f"each row must hold {2 * ring.count} numbers")
    return NearFieldMatrix(data[:, 0::2] + 1j * data[:, 1::2], ring, k, delta, completed)
