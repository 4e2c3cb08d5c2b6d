"""Command line services package."""
