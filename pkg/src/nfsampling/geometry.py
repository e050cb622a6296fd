"""Smooth closed boundary curves and their equispaced discretizations."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi


class ShapeKind(str, Enum):
    CIRCLE = "circle"
    ELLIPSE = "ellipse"
    ROUND_SQUARE = "roundsquare"
    PEANUT = "peanut"
    KITE = "kite"


def _circle(t, r):
    c, s = np.cos(t), np.sin(t)
    return (r * c, r * s), (-r * s, r * c), (-r * c, -r * s)


def _ellipse(t, _):
    c, s = np.cos(t), np.sin(t)
    return (2 * c, 3 * s), (-2 * s, 3 * c), (-2 * c, -3 * s)


def _round_square(t, _):
    c, s = np.cos(t), np.sin(t)
    x = (1.5 * c**3 + 1.5 * c, 1.5 * s**3 + 1.5 * s)
    dx = (-4.5 * c**2 * s - 1.5 * s, 4.5 * s**2 * c + 1.5 * c)
    ddx = (9.0 * c * s**2 - 4.5 * c**3 - 1.5 * c, 9.0 * s * c**2 - 4.5 * s**3 - 1.5 * s)
    return x, dx, ddx


def _peanut(t, _):
    # x(t) = rho(t) (cos t, sin t), rho = 1.5 sqrt(3 cos^2 t + 1)
    c, s = np.cos(t), np.sin(t)
    q = 3 * c**2 + 1
    rho = 1.5 * np.sqrt(q)
    drho = -4.5 * c * s / np.sqrt(q)
    ddrho = -4.5 * (c**2 - s**2) / np.sqrt(q) - 13.5 * c**2 * s**2 / q**1.5
    x = (rho * c, rho * s)
    dx = (drho * c - rho * s, drho * s + rho * c)
    ddx = (ddrho * c - 2 * drho * s - rho * c, ddrho * s + 2 * drho * c - rho * s)
    return x, dx, ddx


def _kite(t, _):
    c, s = np.cos(t), np.sin(t)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    x = (1.1 * c + 0.625 * c2 - 0.625, 1.5 * s)
    dx = (-1.1 * s - 1.25 * s2, 1.5 * c)
    ddx = (-1.1 * c - 2.5 * c2, -1.5 * s)
    return x, dx, ddx


_FORMULAS = {
    ShapeKind.CIRCLE: _circle,
    ShapeKind.ELLIPSE: _ellipse,
    ShapeKind.ROUND_SQUARE: _round_square,
    ShapeKind.PEANUT: _peanut,
    ShapeKind.KITE: _kite,
}


@dataclass(frozen=True)
class ParametricCurve:
    """A counter-clockwise, 2*pi-periodic boundary curve.

    Only the circle has a size parameter; the other shapes have fixed
    coefficients and can only be translated.
    """

    kind: ShapeKind
    center: tuple = (0.0, 0.0)
    radius: float = None

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        x, dx, ddx = _FORMULAS[self.kind](t, self.radius)
        a, b = self.center
        return (
            np.stack([x[0] + a, x[1] + b], axis=-1),
            np.stack(dx, axis=-1),
            np.stack(ddx, axis=-1),
        )

    def position(self, t):
        """Points x(t), shape ``t.shape + (2,)``."""
        return self._eval(t)[0]

    def derivative(self, t):
        """Tangent x'(t) in closed form."""
        return self._eval(t)[1]

    def second_derivative(self, t):
        return self._eval(t)[2]

    def polygon(self, n=2048):
        return self.position(TWO_PI * np.arange(n) / n)

    def contains(self, points, n=2048):
        """Winding-number test; True for points strictly inside the curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        poly = self.polygon(n)
        d = poly[None, :, :] - pts[:, None, :]
        ang = np.arctan2(d[..., 1], d[..., 0])
        turn = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
        turn = (turn + np.pi) % TWO_PI - np.pi
        return np.abs(turn.sum(axis=1)) > np.pi

    def distance(self, points, n=8192):
        """Approximate Euclidean distance from points to the curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tree = cKDTree(self.polygon(n))
        return tree.query(pts)[0]

    def max_radius(self, n=2048):
        return float(np.max(np.hypot(*self.polygon(n).T)))


def make_shape(kind, center=(0.0, 0.0), radius=None):
    """Build one of the catalogue shapes.

    >>> make_shape("kite").position(0.0)
    array([1.1, 0. ])
    """
    try:
        kind = ShapeKind(str(kind).lower().replace(" ", "").replace("_", ""))
    except ValueError:
        raise ValueError(f"unknown shape kind {kind!r}") from None
    center = tuple(float(c) for c in center)
    if len(center) != 2 or not all(np.isfinite(center)):
        raise ValueError("center must be a finite 2D point")
    if kind is ShapeKind.CIRCLE:
        if radius is None or not np.isfinite(radius) or radius <= 0:
            raise ValueError("circle requires a positive radius")
        radius = float(radius)
    elif radius is not None:
        raise ValueError(f"{kind.value} takes no radius parameter")
    return ParametricCurve(kind, center, radius)


@dataclass(frozen=True)
class BoundaryDiscretization:
    """Equispaced parameter nodes t_j = 2*pi*j/n on a curve."""

    curve: ParametricCurve
    n: int
    t: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    tangents: np.ndarray = field(repr=False)
    second: np.ndarray = field(repr=False)

    @property
    def weight(self):
        """Trapezoid weight in the parameter, 2*pi/n."""
        return TWO_PI / self.n

    @property
    def speed(self):
        return np.hypot(self.tangents[:, 0], self.tangents[:, 1])

    @property
    def arc_weights(self):
        """Arc-length quadrature weights |x'(t_j)| * 2*pi/n."""
        return self.speed * self.weight

    @property
    def normals(self):
        """Outward unit normals (curves are counter-clockwise)."""
        return np.stack([self.tangents[:, 1], -self.tangents[:, 0]], axis=1) / self.speed[:, None]


def discretize(curve, n):
    if int(n) != n or n % 2 or n < 4:
        raise ValueError("n must be an even integer >= 4")
    n = int(n)
    t = TWO_PI * np.arange(n) / n
    x, dx, ddx = curve._eval(t)
    return BoundaryDiscretization(curve, n, t, x, dx, ddx)
