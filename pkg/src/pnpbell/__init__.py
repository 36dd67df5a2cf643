"""Penalized N-product Bell inequalities: exact local bounds, polytope checks,
lossy-detector efficiency curves and Monte Carlo simulation."""

__version__ = "0.1.0"
