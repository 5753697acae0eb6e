"""Post-processing for solver run directories: figures and summary tables."""

__version__ = "0.1.0"
