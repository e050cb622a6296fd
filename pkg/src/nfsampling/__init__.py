"""Near-field sampling methods for 2D acoustic inverse scattering."""

from .bie import (
    assemble_double_layer,
    assemble_single_layer,
    assemble_T,
    fundamental_solution,
    mie_circle_exterior,
    mie_circle_interior,
    solve_exterior_dirichlet,
    solve_interior_dirichlet,
)
from .completion import (
    complete_column,
    complete_matrix,
    fourier_coeffs_limited,
    prolate_matrix,
    regularized_inverse,
)
from .estimators import DataCompleter, SamplingImager
from .exceptions import EigenvalueProximityError, FormatError, GeometryError
from .geometry import ParametricCurve, ShapeKind, discretize, make_shape
from .imaging import (
    GridSpec,
    ImagingGrid,
    h_phi_closed_form,
    indicator_cavity,
    indicator_obstacle,
    probe_cavity,
    probe_obstacle,
    s_psi_closed_form,
    sweep,
)
from .nearfield import Mode, NearFieldMatrix, SensorRing, add_noise, restrict, synthesize
from .specfun import bessel_j, bessel_y, hankel1

__version__ = "0.1.0"
