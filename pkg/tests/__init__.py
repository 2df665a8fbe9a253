"""Tests for control-synth."""
