"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Scene geometry violates a containment or disjointness requirement."""


class EigenvalueProximityError(ArithmeticError):
    """A boundary system is too ill-conditioned to trust.

    Raised when k**2 sits at (or very near) a Dirichlet eigenvalue of the
    relevant domain, so the integral operator is numerically singular.
    """


class FormatError(ValueError):
    """A measurement or grid file does not follow its on-disk format."""
