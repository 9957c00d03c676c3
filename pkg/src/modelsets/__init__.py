"""Cut-and-project sets: construction, statistics and Monte-Carlo experiments."""

__version__ = "0.1.0"
