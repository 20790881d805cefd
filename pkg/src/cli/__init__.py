"""Command line interface for star-rz."""
