"""Tests for the benchmark command line."""
