"""Test suite for star-rz."""
