"""Base exception for the package; concrete errors live next to their raisers."""


class CamlpadError(Exception):
    """Root of every error this package raises on purpose."""
