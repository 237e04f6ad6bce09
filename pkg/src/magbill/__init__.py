"""Magnetic billiards in convex domains and outer magnetic billiards.

Submodules: ``geom`` (curves, Larmor circles), ``dynamics`` (the center map M),
``outer`` (the outer map T), ``poly`` (polynomial engine), ``integrals``
(polynomial integrals and the remarkable equation), ``algebra`` (offset curve
singularities and points at infinity) and ``cli``.
"""

from .errors import MagBillError
from .geom import Circle, Ellipse, FourierBoundary, MagneticParams, ParallelCurve, parse_boundary
from .dynamics import LarmorState, center_map_M, orbit
from .outer import OuterConfig, outer_map
from .poly import BivarPoly, UniPoly

__all__ = [
    "MagBillError",
    "Circle",
    "Ellipse",
    "FourierBoundary",
    "MagneticParams",
    "ParallelCurve",
    "parse_boundary",
    "LarmorState",
    "center_map_M",
    "orbit",
    "OuterConfig",
    "outer_map",
    "BivarPoly",
    "UniPoly",
]

__version__ = "0.1.0"
