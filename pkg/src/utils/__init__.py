"""Utility modules for star-rz."""
