"""Data models for star-rz."""
