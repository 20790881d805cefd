"""Tests for numerical service modules."""
