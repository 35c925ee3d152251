"""Solver registry."""
