"""Tests for loewnerlab."""
