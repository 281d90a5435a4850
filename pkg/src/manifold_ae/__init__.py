"""Autoencoders on embedded manifolds: an exact constructive encoder/decoder
with a small tracked bad set, from-scratch neural autoencoders, and the reach
floor on reconstruction error."""

from .geometry import (
    Circle,
    ManifoldSpec,
    Point,
    PointSet,
    Sphere2,
    analytic_reach,
    estimate_reach,
    interlaced_circles,
    nearest_point,
    sample_uniform,
    total_measure,
    unit_circle,
)
from .oracle import OracleAutoencoder, build_oracle, verify_oracle

__version__ = "0.1.0"

__all__ = [
    "Circle", "ManifoldSpec", "Point", "PointSet", "Sphere2", "analytic_reach",
    "estimate_reach", "interlaced_circles", "nearest_point", "sample_uniform",
    "total_measure", "unit_circle", "OracleAutoencoder", "build_oracle", "verify_oracle",
]
