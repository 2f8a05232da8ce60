"""Tests for the crowd calibration toolkit."""
