"""Geodesics on the modular surface in two metrics.

A numerical laboratory for the hyperbolic metric and the equivariant
Weil-Petersson cusp-model surrogate on the upper half-plane modulo
PSL(2,Z): geodesic integration with excursion events, thick-thin
decompositions, cuspidal winding and continued-fraction coding,
fellow-traveling comparisons, and seeded Monte Carlo statistics over
random directions.
"""

from ._kernels import BACKEND
from .modular import (Cusp, GroupElement, HoroballDescriptor, ReductionError,
                      apply_mobius, cusp_of, farey_neighbors, horoball_at,
                      hyperbolic_distance, invariant_height, reduce_point)
from .metrics import (MetricId, MetricParams, conformal_factor, delta_to_cusp,
                      geodesic_rhs, wp_horocycle_height)
from .geodesics import hyperbolic_closed_form, model_quadrature
from .integrate import (ConnectError, GeodesicState, IntegrationError,
                        SegmentBV, Trajectory, connect, integrate_ray)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "Cusp",
    "GroupElement",
    "HoroballDescriptor",
    "ReductionError",
    "apply_mobius",
    "cusp_of",
    "farey_neighbors",
    "horoball_at",
    "hyperbolic_distance",
    "invariant_height",
    "reduce_point",
    "MetricId",
    "MetricParams",
    "conformal_factor",
    "delta_to_cusp",
    "geodesic_rhs",
    "wp_horocycle_height",
    "hyperbolic_closed_form",
    "model_quadrature",
    "ConnectError",
    "GeodesicState",
    "IntegrationError",
    "SegmentBV",
    "Trajectory",
    "connect",
    "integrate_ray",
]
