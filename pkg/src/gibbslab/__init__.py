"""Exact enumeration, contour and Monte Carlo tools for lattice spin systems
with general (possibly long-range) interactions."""

from .gibbs import BoundaryCondition, build_gibbs, log_partition
from .interaction import Interaction, LocalFunction, TwoBodyKernel, ising, ising_with_field, power_law, zero
from .lattice import Rectangle, SiteSet

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "Interaction", "LocalFunction", "Rectangle", "SiteSet", "TwoBodyKernel",
    "build_gibbs", "ising", "ising_with_field", "log_partition", "power_law", "zero",
]
