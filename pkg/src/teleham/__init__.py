"""Numerical exterior calculus and canonical dynamics of a quadratic cotetrad model."""

from teleham.exterior import KForm, MetricAtPoint, Signature, VectorAtPoint

__version__ = "0.1.0"

__all__ = ["KForm", "MetricAtPoint", "Signature", "VectorAtPoint", "__version__"]
