"""Configuration management for star-rz."""
