"""Monte Carlo laboratory for jump diffusions driven by integro-differential operators."""

__version__ = "0.1.0"
