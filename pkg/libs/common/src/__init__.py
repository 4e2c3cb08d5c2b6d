"""Common libraries source code."""
