"""Branch-and-Benders-cut solver for survivable network design."""

__version__ = "0.1.0"
