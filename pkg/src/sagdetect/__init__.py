"""Point-shortcut injection and gradient-based shortcut detection for time-series classifiers."""

__version__ = "0.1.0"
