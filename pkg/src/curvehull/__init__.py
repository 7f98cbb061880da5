"""Convex hulls of curves with totally positive torsion.

Exact boundary parametrizations, concave and convex envelopes, sharp moment
bounds with extremal distributions, and hull volume and boundary area, each
with an independent brute-force cross-check in :mod:`curvehull.oracle`.
"""

from .curve import (
    CurveSpec,
    TorsionReport,
    certify_totally_positive,
    chord_det,
    load_curve,
    ordered_derivative_det,
    parse_curve,
    sensitive,
    torsion_minors,
)
from .envelope import (
    EnvelopeResult,
    Hyperplane,
    SolverConfig,
    b_inf,
    b_sup,
    invert_projected,
    supporting_hyperplane,
)
from .errors import (
    CurveHullError,
    DegeneratePivot,
    Infeasible,
    IntegrandError,
    NoConvergence,
    NotInterior,
    OutsideHull,
    ShapeMismatch,
    SingularJacobian,
)
from .geometry import IntegralResult, QuadratureConfig, hull_surface_area, hull_volume
from .hull_param import (
    Side,
    SimplexParam,
    canonicalize,
    full_map,
    jacobian_projected,
    lower_map,
    lower_map_projected,
    sample_boundary,
    upper_map,
    upper_map_projected,
)
from .moment import (
    PrincipalRepresentation,
    hankel_K,
    hankel_S,
    moment_bounds,
    moment_curve_envelope,
    optimizer_distribution,
)

# ``moment`` and ``envelope`` stay reachable as submodules, not as the
# same-named functions inside them
__all__ = [name for name in dir() if not name.startswith("_")]
