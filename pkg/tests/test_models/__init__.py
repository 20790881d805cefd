"""Tests for configuration and result models."""
