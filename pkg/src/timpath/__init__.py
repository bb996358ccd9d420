"""Coverage path planning for thermal interface material dispensing."""

__version__ = "0.1.0"
