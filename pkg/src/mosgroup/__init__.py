"""Metric operator spaces, units and the index of finite-dimensional CP semigroups."""

__version__ = "0.1.0"
