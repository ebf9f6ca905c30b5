"""Tests for SWAP sparse regression."""
