"""Tests for moran_fpras."""
