"""Free-knot spline approximation of scalar SDEs with additive noise."""

__version__ = "0.1.0"
