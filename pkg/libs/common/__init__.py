"""Shared exceptions, logging and report models for the critical wave lab."""
