"""ufgkit: bracket hierarchies, UFG certificates, decay rates and Monte Carlo checks."""

__version__ = "0.1.0"
