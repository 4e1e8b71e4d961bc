"""Fast quantum multiplication via recursive phase products."""

__version__ = "0.1.0"
