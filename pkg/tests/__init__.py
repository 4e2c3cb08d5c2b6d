"""Root tests package."""
