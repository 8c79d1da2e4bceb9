"""Wolff potentials, Kato-class diagnostics and a degenerate parabolic p-Laplacian solver."""
__version__ = "0.1.0"
