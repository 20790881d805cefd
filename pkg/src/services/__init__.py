"""Numerical services for star-rz."""
