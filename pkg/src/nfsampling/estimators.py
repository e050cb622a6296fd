"""Estimator-style wrappers around imaging and completion.

scikit-learn's own validators reject complex input, so the small checks
below stand in for ``check_array``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import completion, imaging
from .nearfield import NearFieldMatrix


def check_near_field(nf, *, require_full=False, require_arc=False):
    """Validate a NearFieldMatrix: square, finite, matching its ring."""
    if not isinstance(nf, NearFieldMatrix):
        raise TypeError(f"expected a NearFieldMatrix, got {type(nf).__name__}")
    e = nf.entries
    if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] != nf.ring.count:
        raise ValueError("near-field entries must be square and match the sensor count")
    if not np.all(np.isfinite(e)):
        raise ValueError("near-field entries contain NaN or inf")
    if require_full and not nf.ring.is_full:
        raise ValueError("a full-aperture matrix is required")
    if require_arc and nf.ring.is_full:
        raise ValueError("a limited-aperture (arc) matrix is required")
    return nf


def check_points(points):
    """Return a finite float array of shape (P, 2)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.size == 2:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("sampling points must have shape (n_points, 2)")
    if not np.all(np.isfinite(pts)):
        raise ValueError("sampling points must be finite")
    return pts


class SamplingImager(BaseEstimator):
    """Sampling-type imaging from a near-field matrix.

    Parameters
    ----------
    truncation : int, optional
        Probe order M (obstacle) or m (cavity). Defaults to 32 or 3.
    normalization : {"delta", "uniform"}
        Probe weighting, see :mod:`nfsampling.imaging`.
    threads : int, optional
        Worker cap for grid sweeps.

    Examples
    --------
    >>> imager = SamplingImager().fit(nf)          # doctest: +SKIP
    >>> grid = imager.image()                      # doctest: +SKIP
    """

    def __init__(self, truncation=None, normalization="delta", threads=None):
        self.truncation = truncation
        self.normalization = normalization
        self.threads = threads

    def fit(self, X, y=None):
        self.near_field_ = check_near_field(X)
        self.mode_ = X.ring.mode
        self.truncation_ = (
            imaging.DEFAULT_TRUNCATION[self.mode_] if self.truncation is None else int(self.truncation)
        )
        return self

    def score_samples(self, X):
        """Raw indicator values at sampling points X of shape (P, 2)."""
        check_is_fitted(self, "near_field_")
        return imaging.indicator_values(
            self.near_field_, check_points(X), self.truncation_, self.threads,
            normalization=self.normalization,
        )

    def image(self, grid=None):
        """Normalized indicator on a grid (mode default when omitted)."""
        check_is_fitted(self, "near_field_")
        return imaging.sweep(
            self.near_field_, grid, self.truncation_, self.threads, self.normalization
        )


class DataCompleter(TransformerMixin, BaseEstimator):
    """Prolate-matrix completion of limited-aperture near-field data.

    ``fit`` precomputes the completion operator for the arc geometry;
    ``transform`` applies the two-pass completion to matrices on that arc.
    """

    def __init__(self, J=50, eps=1e-3, threads=None):
        self.J = J
        self.eps = eps
        self.threads = threads

    def fit(self, X, y=None):
        check_near_field(X, require_arc=True)
        self.ring_ = X.ring
        self.operator_ = completion.completion_operator(X.ring, self.J, self.eps)
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        check_near_field(X, require_arc=True)
        if X.ring != self.ring_:
            raise ValueError("matrix was recorded on a different arc than the fitted one")
        return completion.complete_matrix(X, self.J, self.eps, self.threads, self.operator_)
