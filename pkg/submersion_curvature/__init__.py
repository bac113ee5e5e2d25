"""Modified scalar curvature on weighted manifolds and Riemannian submersions."""

from .diffgeo_core import ChartDomain, DensityField, DifferentiationConfig, MetricField, ScalarField
from .submersion import IdentityId, IdentityReport, KKSubmersion
from .weighted_geometry import WeightedManifold

__all__ = [
    "ChartDomain",
    "DensityField",
    "DifferentiationConfig",
    "IdentityId",
    "IdentityReport",
    "KKSubmersion",
    "MetricField",
    "ScalarField",
    "WeightedManifold",
]
