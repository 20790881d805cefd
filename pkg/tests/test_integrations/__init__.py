"""Tests for result file integration."""
