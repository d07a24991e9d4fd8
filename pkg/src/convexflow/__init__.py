"""convexflow: constrained curvature flows of convex hypersurfaces."""

__version__ = "0.1.0"
