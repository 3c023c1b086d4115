"""
Multisite tensor network path integral simulations of spin chains with a local harmonic
bath on every site.
"""

__version__ = "0.1.0"
