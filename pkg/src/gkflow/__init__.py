"""Numerical laboratory for a fully nonlinear two-convex curvature flow
on rotationally symmetric hypersurfaces, with neck surgery and live
estimate monitors."""

__version__ = "0.1.0"
