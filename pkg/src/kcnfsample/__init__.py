"""Uniform solution sampling for k-CNF formulas."""
