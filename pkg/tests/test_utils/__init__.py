"""Tests for error handling and monitoring utilities."""
