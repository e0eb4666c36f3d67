"""Numerical toolkit for self-contracted planar curves and gradient orbits."""
from .annulus import (AnnulusParams, SegmentKind, annulus_length_estimate,
                      classify_segment, eta_for_annulus, full_length_bound,
                      polygonal_approximation, project_pi)
from .curve import (LENGTH_BOUND_FACTOR, Polyline, check_main_bound,
                    check_self_contracted, check_self_contracted_bruteforce,
                    endpoint_gap, length)
from .fields import (ScalarField, check_convex_sampled, check_quasiconvex_sampled,
                     max_affine_field, norm_field, parse_field, quadratic_field,
                     spiral_field)
from .flow import FlowConfig, Orbit, integrate_gradient, integrate_proximal
from .foliation import (ConvexBody, FoliationFamily, foliation_value,
                        orthogonal_trajectory, torralba_construction)

__version__ = "0.1.0"

__all__ = [
    "AnnulusParams", "SegmentKind", "annulus_length_estimate", "classify_segment",
    "eta_for_annulus", "full_length_bound", "polygonal_approximation", "project_pi",
    "LENGTH_BOUND_FACTOR", "Polyline", "check_main_bound", "check_self_contracted",
    "check_self_contracted_bruteforce", "endpoint_gap", "length", "ScalarField",
    "check_convex_sampled", "check_quasiconvex_sampled", "max_affine_field",
    "norm_field", "parse_field", "quadratic_field", "spiral_field", "FlowConfig",
    "Orbit", "integrate_gradient", "integrate_proximal", "ConvexBody",
    "FoliationFamily", "foliation_value", "orthogonal_trajectory",
    "torralba_construction", "__version__",
]
