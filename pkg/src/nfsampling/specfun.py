"""Integer-order cylinder functions of real argument.

Thin, validated wrappers around :mod:`scipy.special`. Negative orders are
resolved here through the reflection formulas so that
``bessel_j(-n, x) == (-1)**n * bessel_j(n, x)`` holds bit for bit.
"""

import numpy as np
from scipy import special

MAX_ORDER = 200


def _prepare(order, x):
    n = np.asarray(order)
    if n.dtype.kind not in "iu":
        if n.dtype.kind != "f" or not np.all(np.mod(n, 1) == 0):
            raise TypeError("cylinder function order must be an integer")
        n = n.astype(np.int64)
    if np.any(np.abs(n) > MAX_ORDER):
        raise ValueError(f"|order| must not exceed {MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("argument must be finite")
    return n, x


def _reflect(n, value):
    # C_{-n} = (-1)^n C_n for J, Y and H^(1)
    flip = (n < 0) & (np.abs(n) % 2 == 1)
    return np.where(flip, -value, value)


def _as_output(value):
    return value[()] if np.ndim(value) == 0 else value


def bessel_j(order, x):
    """Bessel function of the first kind, J_n(x), for x >= 0.

    Parameters
    ----------
    order : int or array of int
        Signed order, ``|order| <= 200``.
    x : float or array
        Nonnegative argument. Broadcasts against ``order``.
    """
    n, x = _prepare(order, x)
    if np.any(x < 0):
        raise ValueError("bessel_j requires x >= 0")
    return _as_output(_reflect(n, special.jv(np.abs(n), x)))


def bessel_y(order, x):
    """Bessel function of the second kind (Neumann function), Y_n(x), x > 0."""
    n, x = _prepare(order, x)
    if np.any(x <= 0):
        raise ValueError("bessel_y is singular at x <= 0")
    return _as_output(_reflect(n, special.yv(np.abs(n), x)))


def hankel1(order, x):
    """Hankel function of the first kind, H_n^(1)(x) = J_n(x) + i Y_n(x).

    A nonpositive argument usually means a Green's function was evaluated
    at coincident points, so it is rejected rather than returned as inf.
    """
    n, x = _prepare(order, x)
    if np.any(x <= 0):
        raise ValueError("hankel1 is singular at x <= 0 (coincident points?)")
    m = np.abs(n)
    value = special.jv(m, x) + 1j * special.yv(m, x)
    return _as_output(_reflect(n, value))
