"""Shared libraries package."""
