"""Geometric phase propagator approach to driven quantum systems."""
