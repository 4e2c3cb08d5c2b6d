"""Command line service of the critical wave lab."""
