"""Hausdorff dimension and measure of truncated Gauss-type limit sets."""

__version__ = "0.1.0"
