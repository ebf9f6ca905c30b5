"""Tests for solver implementations."""
