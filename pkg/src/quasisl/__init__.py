"""Sturm-Liouville operators with distributional potentials in
quasi-derivative form."""

__version__ = "0.1.0"
