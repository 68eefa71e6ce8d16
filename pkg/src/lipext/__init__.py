"""Lipschitz extensions into finite-dimensional normed spaces, and their extension constants."""

from .averaging import PointEvaluationMap, average_projection, interpolation_projection, kernel_point_map
from .constants import le_complex, le_diag, le_mn, le_mn_sa, omega, p_norm_quadrature, pc_complex_n
from .errors import LipextError
from .extension import (
    ExtensionResult,
    KernelProjection,
    coordinatewise_extend,
    discrete_projection_norm,
    extend_norm_preserving,
    extend_sa,
    kernel_matrix,
    kernel_project_reconstruct,
    mcshane_extend,
    radial_retract,
)
from .oracle import OracleResult, feasible_extension, four_point_example, minimal_extension, prospect_lower_bound
from .sampling import QuadratureSet, RankOneNode, make_rng, sample_haar_unitary, sample_quadrature, sample_unit_vector
from .spaces import (
    FiniteMetricSpace,
    PartialFunction,
    SpaceDescriptor,
    SpaceElement,
    lipschitz_constant,
    norm,
    pairing_sa,
)

__version__ = "0.1.0"
