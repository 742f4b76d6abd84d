"""Computation and orchestration services package.

This package contains the expression front end, the jet seeding service,
the geometric services for the base, the lift and its curvature, and the
services that sample points, run suites and write reports.
"""

from . import (
    cartan_service,
    config_service,
    curvature_service,
    expression_service,
    jet_service,
    kahler_service,
    preset_service,
    report_service,
    sampling_service,
    verification_service,
)

__all__ = [
    "cartan_service",
    "config_service",
    "curvature_service",
    "expression_service",
    "jet_service",
    "kahler_service",
    "preset_service",
    "report_service",
    "sampling_service",
    "verification_service",
]
