"""Numerical modules of the critical wave lab."""
