"""Discretized Ahlfors currents, their pairings and limit diagnostics."""

from .core import (
    ClusterReport,
    DensityPointReport,
    DiscreteCurrent,
    MomentVector,
    build_current,
    cluster_analysis,
    density_point_ratio,
    moments,
    pair,
)
from .pairings import BoundStudy, PairingResult, chi_delta, d_pairing, ddc_bound_study, ddc_pairing, ddc_pairings
from .positivity import BrodyResult, IntersectionCurve, brody_detector, intersection_positivity

__all__ = [
    "BoundStudy", "ddc_bound_study", "ddc_pairings",
    "BrodyResult", "IntersectionCurve", "brody_detector", "intersection_positivity",
    "ClusterReport", "DensityPointReport", "DiscreteCurrent", "MomentVector", "PairingResult", "build_current",
    "chi_delta", "cluster_analysis", "d_pairing", "ddc_pairing", "density_point_ratio", "moments", "pair",
]
