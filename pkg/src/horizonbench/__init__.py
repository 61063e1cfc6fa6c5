"""Multi-horizon traffic forecasting benchmark: statistical, ML and deep models from scratch."""

__version__ = "0.1.0"
